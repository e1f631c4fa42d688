// SPDX-License-Identifier: Apache-2.0

#include "gatelab/bptt.hpp"

#include <cmath>
#include <stdexcept>

namespace gatelab {

GradientSet GradientSet::zeros_like(const Params& p) {
  GradientSet g;
  g.w_rec = Matrix(p.w_rec.rows(), p.w_rec.cols());
  g.w_in = Matrix(p.w_in.rows(), p.w_in.cols());
  g.w_out = Matrix(p.w_out.rows(), p.w_out.cols());
  g.w_rec_gate = Matrix(p.w_rec_gate.rows(), p.w_rec_gate.cols());
  g.w_in_gate = Matrix(p.w_in_gate.rows(), p.w_in_gate.cols());
  return g;
}

std::vector<double> GradientSet::flatten() const {
  std::vector<double> out;
  out.reserve(flat_dim());
  for (const Matrix* m : {&w_rec, &w_in, &w_out, &w_rec_gate, &w_in_gate}) {
    out.insert(out.end(), m->data().begin(), m->data().end());
  }
  return out;
}

std::size_t GradientSet::flat_dim() const {
  return w_rec.size() + w_in.size() + w_out.size() + w_rec_gate.size() +
         w_in_gate.size();
}

void Batch::validate() const {
  if (inputs.empty()) throw std::invalid_argument("Batch: empty batch");
  if (inputs.size() != targets.size()) {
    throw std::invalid_argument("Batch: inputs/targets count mismatch");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != mask.size() || targets[i].size() != mask.size()) {
      throw std::invalid_argument("Batch: sequence length mismatch");
    }
  }
}

double mse_loss(const std::vector<std::vector<double>>& z,
                const std::vector<std::vector<double>>& target,
                const std::vector<std::uint8_t>& mask) {
  if (z.size() != target.size() || z.size() != mask.size()) {
    throw std::invalid_argument("mse_loss: length mismatch");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (!mask[t]) continue;
    if (z[t].size() != target[t].size()) {
      throw std::invalid_argument("mse_loss: output dimension mismatch");
    }
    for (std::size_t o = 0; o < z[t].size(); ++o) {
      double d = z[t][o] - target[t][o];
      acc += d * d;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("mse_loss: empty mask");
  return acc / static_cast<double>(count);
}

namespace {

struct SeqGrad {
  GradientSet grads;
  double loss = 0.0;
};

// Reverse accumulation through one stored trajectory.
SeqGrad backward_one(const ModelKind& kind, const Params& p,
                     const std::vector<std::vector<double>>& inputs,
                     const std::vector<std::vector<double>>& targets,
                     const std::vector<std::uint8_t>& mask) {
  const std::size_t n = p.n_rec();
  const std::size_t n_out = p.n_out();
  Trajectory traj = forward(kind, p, inputs);
  auto z = readout(p, traj);
  const std::size_t horizon = traj.horizon();

  std::size_t masked = 0;
  for (auto m : mask) {
    if (m) ++masked;
  }
  if (masked == 0) throw std::invalid_argument("bptt_grad: empty mask");
  const double loss_scale =
      1.0 / (static_cast<double>(masked) * static_cast<double>(n_out));

  SeqGrad out;
  out.grads = GradientSet::zeros_like(p);
  out.loss = mse_loss(z, targets, mask);

  std::vector<double> delta(n, 0.0);
  std::vector<double> da(n), new_delta(n), tmp(n);

  for (std::size_t t = horizon; t >= 1; --t) {
    if (mask[t - 1]) {
      // dE/dz_t and its two fan-outs: into w_out and into the state.
      for (std::size_t o = 0; o < n_out; ++o) {
        double dz = 2.0 * loss_scale * (z[t - 1][o] - targets[t - 1][o]);
        for (std::size_t c = 0; c < n; ++c) {
          out.grads.w_out(o, c) += dz * traj.states[t][c];
          delta[c] += dz * p.w_out(o, c);
        }
      }
    }

    const auto& a = traj.preacts[t - 1];
    const auto& x_prev = traj.states[t - 1];
    const auto& u = traj.inputs[t - 1];

    switch (kind.family) {
      case ModelKind::Family::kPlain:
        for (std::size_t i = 0; i < n; ++i) {
          da[i] = delta[i] * activation_deriv(p.activation, a[i]);
        }
        matvec_transpose(p.w_rec, da, new_delta);
        break;
      case ModelKind::Family::kLeaky:
        for (std::size_t i = 0; i < n; ++i) {
          da[i] = kind.alpha * delta[i] * activation_deriv(p.activation, a[i]);
        }
        matvec_transpose(p.w_rec, da, new_delta);
        for (std::size_t i = 0; i < n; ++i) {
          new_delta[i] += (1.0 - kind.alpha) * delta[i];
        }
        break;
      case ModelKind::Family::kScalarGate: {
        double g = traj.gates[t - 1][0];
        double sd = g * (1.0 - g);
        double dg = 0.0;  // dE/dg = sum_i delta_i d_i
        for (std::size_t i = 0; i < n; ++i) {
          dg += delta[i] * (activation_value(p.activation, a[i]) - x_prev[i]);
          da[i] = delta[i] * g * activation_deriv(p.activation, a[i]);
        }
        double dag = dg * sd;
        matvec_transpose(p.w_rec, da, new_delta);
        for (std::size_t i = 0; i < n; ++i) {
          new_delta[i] += (1.0 - g) * delta[i] + dag * p.w_rec_gate(0, i);
        }
        for (std::size_t c = 0; c < n; ++c) {
          out.grads.w_rec_gate(0, c) += dag * x_prev[c];
        }
        for (std::size_t c = 0; c < u.size(); ++c) {
          out.grads.w_in_gate(0, c) += dag * u[c];
        }
        break;
      }
      case ModelKind::Family::kMultiGate: {
        const auto& g = traj.gates[t - 1];
        for (std::size_t i = 0; i < n; ++i) {
          double d_i = activation_value(p.activation, a[i]) - x_prev[i];
          double dag_i = delta[i] * d_i * g[i] * (1.0 - g[i]);
          tmp[i] = dag_i;
          da[i] = delta[i] * g[i] * activation_deriv(p.activation, a[i]);
          for (std::size_t c = 0; c < n; ++c) {
            out.grads.w_rec_gate(i, c) += dag_i * x_prev[c];
          }
          for (std::size_t c = 0; c < u.size(); ++c) {
            out.grads.w_in_gate(i, c) += dag_i * u[c];
          }
        }
        matvec_transpose(p.w_rec, da, new_delta);
        std::vector<double> gate_back(n, 0.0);
        matvec_transpose(p.w_rec_gate, tmp, gate_back);
        for (std::size_t i = 0; i < n; ++i) {
          new_delta[i] += (1.0 - g[i]) * delta[i] + gate_back[i];
        }
        break;
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < n; ++c) {
        out.grads.w_rec(i, c) += da[i] * x_prev[c];
      }
      for (std::size_t c = 0; c < u.size(); ++c) {
        out.grads.w_in(i, c) += da[i] * u[c];
      }
    }
    delta = new_delta;
  }
  return out;
}

void accumulate(GradientSet& into, const GradientSet& g) {
  auto acc = [](Matrix& a, const Matrix& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  };
  acc(into.w_rec, g.w_rec);
  acc(into.w_in, g.w_in);
  acc(into.w_out, g.w_out);
  acc(into.w_rec_gate, g.w_rec_gate);
  acc(into.w_in_gate, g.w_in_gate);
}

void scale_inplace(GradientSet& g, double s) {
  for (Matrix* m : {&g.w_rec, &g.w_in, &g.w_out, &g.w_rec_gate, &g.w_in_gate}) {
    for (double& v : m->data()) v *= s;
  }
}

}  // namespace

double batch_loss(const ModelKind& kind, const Params& p, const Batch& batch) {
  batch.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto z = readout(p, forward(kind, p, batch.inputs[i]));
    acc += mse_loss(z, batch.targets[i], batch.mask);
  }
  return acc / static_cast<double>(batch.size());
}

GradientSet bptt_grad(const ModelKind& kind, const Params& p, const Batch& batch,
                      double* loss_out) {
  batch.validate();
  GradientSet total = GradientSet::zeros_like(p);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    SeqGrad sg = backward_one(kind, p, batch.inputs[i], batch.targets[i], batch.mask);
    accumulate(total, sg.grads);
    loss += sg.loss;
  }
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  scale_inplace(total, inv_m);
  if (loss_out) *loss_out = loss * inv_m;
  return total;
}

GradientSet fd_grad(const ModelKind& kind, const Params& p, const Batch& batch,
                    double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_grad: h must be > 0");
  batch.validate();
  Params work = p;
  GradientSet g = GradientSet::zeros_like(p);
  auto sweep = [&](Matrix& pm, Matrix& gm) {
    for (std::size_t i = 0; i < pm.size(); ++i) {
      double orig = pm.data()[i];
      pm.data()[i] = orig + h;
      double lp = batch_loss(kind, work, batch);
      pm.data()[i] = orig - h;
      double lm = batch_loss(kind, work, batch);
      pm.data()[i] = orig;
      gm.data()[i] = (lp - lm) / (2.0 * h);
    }
  };
  sweep(work.w_rec, g.w_rec);
  sweep(work.w_in, g.w_in);
  sweep(work.w_out, g.w_out);
  sweep(work.w_rec_gate, g.w_rec_gate);
  sweep(work.w_in_gate, g.w_in_gate);
  return g;
}

Matrix per_sample_grad_matrix(const ModelKind& kind, const Params& p,
                              const Batch& probe) {
  probe.validate();
  if (probe.size() < 2) {
    throw std::invalid_argument("per_sample_grad_matrix: need at least 2 sequences");
  }
  Matrix out(probe.size(), p.flat_dim());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    SeqGrad sg = backward_one(kind, p, probe.inputs[i], probe.targets[i], probe.mask);
    auto flat = sg.grads.flatten();
    std::copy(flat.begin(), flat.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace gatelab
