// SPDX-License-Identifier: Apache-2.0

#include "gatelab/tasks.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "gatelab/rng.hpp"

namespace gatelab {

std::string task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kAdding: return "adding";
    case TaskKind::kAr2: return "ar2";
    case TaskKind::kDelaySum: return "delay_sum";
    case TaskKind::kMovingAverage: return "moving_average";
    case TaskKind::kNarma10: return "narma10";
  }
  return "?";
}

TaskKind task_from_name(const std::string& name) {
  if (name == "adding") return TaskKind::kAdding;
  if (name == "ar2") return TaskKind::kAr2;
  if (name == "delay_sum") return TaskKind::kDelaySum;
  if (name == "moving_average") return TaskKind::kMovingAverage;
  if (name == "narma10") return TaskKind::kNarma10;
  throw std::invalid_argument("unknown task: " + name);
}

void TaskSpec::validate() const {
  if (seq_len < 2) throw std::invalid_argument("TaskSpec: seq_len too small");
  switch (kind) {
    case TaskKind::kDelaySum:
      if (delay_d1 == 0 || delay_d2 <= delay_d1 || delay_d2 >= seq_len) {
        throw std::invalid_argument("TaskSpec: need 0 < d1 < d2 < seq_len");
      }
      break;
    case TaskKind::kMovingAverage:
      if (ma_window == 0 || ma_window >= seq_len) {
        throw std::invalid_argument("TaskSpec: need 0 < window < seq_len");
      }
      break;
    case TaskKind::kNarma10:
      if (seq_len <= 10) throw std::invalid_argument("TaskSpec: narma10 needs seq_len > 10");
      break;
    case TaskKind::kAr2: {
      double a = ar2_a, b = ar2_b;
      if (!(std::abs(b) < 1.0 && b + a < 1.0 && b - a < 1.0)) {
        throw std::invalid_argument("TaskSpec: AR(2) coefficients outside stability triangle");
      }
      break;
    }
    case TaskKind::kAdding:
      break;
  }
}

namespace {

using Seq = std::vector<std::vector<double>>;

// Sub-stream ids leave room for NARMA retries: sequence i, attempt r maps
// to stream i * 16 + r.
CounterRng seq_rng(const TaskSpec& spec, std::size_t index, std::size_t retry) {
  return CounterRng(spec.seed, static_cast<std::uint64_t>(index) * 16 + retry);
}

void gen_adding(const TaskSpec& spec, std::size_t index, Seq& u, Seq& y) {
  CounterRng rng = seq_rng(spec, index, 0);
  const std::size_t T = spec.seq_len;
  for (std::size_t t = 0; t < T; ++t) u[t] = {rng.next_uniform(), 0.0};
  std::size_t p1 = rng.next_below(T);
  std::size_t p2 = rng.next_below(T - 1);
  if (p2 >= p1) ++p2;  // distinct positions, uniform over ordered pairs
  u[p1][1] = 1.0;
  u[p2][1] = 1.0;
  for (std::size_t t = 0; t < T; ++t) y[t] = {0.0};
  y[T - 1][0] = u[p1][0] + u[p2][0];
}

void gen_ar2(const TaskSpec& spec, std::size_t index, Seq& u, Seq& y) {
  CounterRng rng = seq_rng(spec, index, 0);
  const std::size_t T = spec.seq_len;
  double ym1 = 0.0, ym2 = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    u[t] = {rng.next_normal()};
    double yt = spec.ar2_a * ym1 + spec.ar2_b * ym2 + u[t][0];
    y[t] = {yt};
    ym2 = ym1;
    ym1 = yt;
  }
}

void gen_delay_sum(const TaskSpec& spec, std::size_t index, Seq& u, Seq& y) {
  CounterRng rng = seq_rng(spec, index, 0);
  const std::size_t T = spec.seq_len;
  for (std::size_t t = 0; t < T; ++t) u[t] = {rng.next_uniform(-1.0, 1.0)};
  // target at state t (1-based) sums inputs d1 and d2 steps back, with
  // zero-padded history before the sequence start
  for (std::size_t t = 1; t <= T; ++t) {
    double v1 = t >= spec.delay_d1 + 1 ? u[t - spec.delay_d1 - 1][0] : 0.0;
    double v2 = t >= spec.delay_d2 + 1 ? u[t - spec.delay_d2 - 1][0] : 0.0;
    y[t - 1] = {v1 + v2};
  }
}

void gen_moving_average(const TaskSpec& spec, std::size_t index, Seq& u, Seq& y) {
  CounterRng rng = seq_rng(spec, index, 0);
  const std::size_t T = spec.seq_len;
  const std::size_t w = spec.ma_window;
  for (std::size_t t = 0; t < T; ++t) u[t] = {rng.next_uniform(-1.0, 1.0)};
  for (std::size_t t = 1; t <= T; ++t) {
    std::size_t lo = t > w ? t - w : 0;
    double acc = 0.0;
    for (std::size_t s = lo; s < t; ++s) acc += u[s][0];
    y[t - 1] = {acc / static_cast<double>(t - lo)};
  }
}

// Standard NARMA10 recurrence; rarely blows up, in which case the sequence
// is regenerated from the next retry sub-stream.
bool gen_narma10(const TaskSpec& spec, std::size_t index, std::size_t retry,
                 Seq& u, Seq& y) {
  CounterRng rng = seq_rng(spec, index, retry);
  const std::size_t T = spec.seq_len;
  for (std::size_t t = 0; t < T; ++t) u[t] = {rng.next_uniform(0.0, 0.5)};
  std::vector<double> yy(T + 1, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double sum10 = 0.0;
    std::size_t lo = t >= 9 ? t - 9 : 0;
    for (std::size_t s = lo; s <= t; ++s) sum10 += yy[s];
    double u_back = t >= 9 ? u[t - 9][0] : 0.0;
    yy[t + 1] = 0.3 * yy[t] + 0.05 * yy[t] * sum10 + 1.5 * u_back * u[t][0] + 0.1;
    if (!std::isfinite(yy[t + 1]) || std::abs(yy[t + 1]) > 1e3) return false;
  }
  for (std::size_t t = 1; t <= T; ++t) y[t - 1] = {yy[t]};
  return true;
}

}  // namespace

Batch generate_batch(const TaskSpec& spec, std::size_t n) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("generate_batch: n must be >= 1");
  const std::size_t T = spec.seq_len;

  Batch batch;
  batch.inputs.resize(n, Seq(T));
  batch.targets.resize(n, Seq(T));
  batch.mask.assign(T, 0);

  switch (spec.kind) {
    case TaskKind::kAdding:
      batch.mask[T - 1] = 1;
      break;
    case TaskKind::kAr2:
      for (auto& m : batch.mask) m = 1;
      break;
    case TaskKind::kDelaySum:
      for (std::size_t t = spec.delay_d2 + 1; t <= T; ++t) batch.mask[t - 1] = 1;
      break;
    case TaskKind::kMovingAverage:
      for (std::size_t t = spec.ma_window + 1; t <= T; ++t) batch.mask[t - 1] = 1;
      break;
    case TaskKind::kNarma10:
      for (std::size_t t = 11; t <= T; ++t) batch.mask[t - 1] = 1;
      break;
  }

  for (std::size_t i = 0; i < n; ++i) {
    switch (spec.kind) {
      case TaskKind::kAdding:
        gen_adding(spec, i, batch.inputs[i], batch.targets[i]);
        break;
      case TaskKind::kAr2:
        gen_ar2(spec, i, batch.inputs[i], batch.targets[i]);
        break;
      case TaskKind::kDelaySum:
        gen_delay_sum(spec, i, batch.inputs[i], batch.targets[i]);
        break;
      case TaskKind::kMovingAverage:
        gen_moving_average(spec, i, batch.inputs[i], batch.targets[i]);
        break;
      case TaskKind::kNarma10: {
        std::size_t retry = 0;
        while (!gen_narma10(spec, i, retry, batch.inputs[i], batch.targets[i])) {
          if (++retry >= 10) {
            throw std::runtime_error("generate_batch: narma10 diverged 10 times for sequence " +
                                     std::to_string(i));
          }
        }
        break;
      }
    }
  }
  return batch;
}

void write_batch_csv(std::ostream& os, const Batch& batch) {
  batch.validate();
  const std::size_t n_in = batch.inputs[0][0].size();
  const std::size_t n_out = batch.targets[0][0].size();
  os << "seq_id,t";
  for (std::size_t d = 0; d < n_in; ++d) os << ",u" << d;
  if (n_out == 1) {
    os << ",target";
  } else {
    for (std::size_t d = 0; d < n_out; ++d) os << ",target" << d;
  }
  os << ",mask\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < batch.horizon(); ++t) {
      os << i << ',' << (t + 1);
      for (double v : batch.inputs[i][t]) os << ',' << v;
      for (double v : batch.targets[i][t]) os << ',' << v;
      os << ',' << int(batch.mask[t]) << '\n';
    }
  }
}

}  // namespace gatelab
