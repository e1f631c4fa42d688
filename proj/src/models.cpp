// SPDX-License-Identifier: Apache-2.0

#include "gatelab/models.hpp"

#include <cmath>

#include "gatelab/rng.hpp"

namespace gatelab {

double activation_value(Activation act, double a) {
  return act == Activation::kTanh ? std::tanh(a) : a;
}

double activation_deriv(Activation act, double a) {
  if (act == Activation::kIdentity) return 1.0;
  double t = std::tanh(a);
  return 1.0 - t * t;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ModelKind ModelKind::leaky(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("ModelKind::leaky: alpha must be in (0,1]");
  }
  return {Family::kLeaky, alpha};
}

std::string ModelKind::name() const {
  switch (family) {
    case Family::kPlain: return "plain";
    case Family::kLeaky: return "leaky";
    case Family::kScalarGate: return "scalar_gate";
    case Family::kMultiGate: return "multi_gate";
  }
  return "?";
}

ModelKind ModelKind::from_name(const std::string& name, double alpha) {
  if (name == "plain") return plain();
  if (name == "leaky") return leaky(alpha);
  if (name == "scalar_gate") return scalar_gate();
  if (name == "multi_gate") return multi_gate();
  throw std::invalid_argument("unknown model kind: " + name);
}

std::size_t Params::flat_dim() const {
  return w_rec.size() + w_in.size() + w_out.size() + w_rec_gate.size() +
         w_in_gate.size();
}

void Params::validate(const ModelKind& kind) const {
  const std::size_t nr = n_rec();
  if (w_rec.rows() != nr || w_rec.cols() != nr) {
    throw std::invalid_argument("Params: w_rec must be square");
  }
  if (w_in.rows() != nr) throw std::invalid_argument("Params: w_in rows != n_rec");
  if (w_out.cols() != nr) throw std::invalid_argument("Params: w_out cols != n_rec");
  switch (kind.family) {
    case ModelKind::Family::kPlain:
    case ModelKind::Family::kLeaky:
      if (!w_rec_gate.empty() || !w_in_gate.empty()) {
        throw std::invalid_argument("Params: gate matrices must be absent");
      }
      break;
    case ModelKind::Family::kScalarGate:
      if (w_rec_gate.rows() != 1 || w_rec_gate.cols() != nr ||
          w_in_gate.rows() != 1 || w_in_gate.cols() != n_in()) {
        throw std::invalid_argument("Params: scalar gate shapes inconsistent");
      }
      break;
    case ModelKind::Family::kMultiGate:
      if (w_rec_gate.rows() != nr || w_rec_gate.cols() != nr ||
          w_in_gate.rows() != nr || w_in_gate.cols() != n_in()) {
        throw std::invalid_argument("Params: multi gate shapes inconsistent");
      }
      break;
  }
}

namespace {

Matrix random_matrix(CounterRng& rng, std::size_t rows, std::size_t cols,
                     double std_dev) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = std_dev * rng.next_normal();
  return m;
}

}  // namespace

Params init_params(const ModelKind& kind, std::size_t n_rec, std::size_t n_in,
                   std::size_t n_out, std::uint64_t seed, Activation activation,
                   double rec_spectral_norm) {
  if (n_rec == 0 || n_in == 0 || n_out == 0) {
    throw std::invalid_argument("init_params: zero dimension");
  }
  CounterRng rng(seed);
  Params p;
  p.activation = activation;
  p.w_rec = random_matrix(rng, n_rec, n_rec, 1.0);
  double s1 = svd_values(p.w_rec)[0];
  if (s1 > 0.0) p.w_rec = scale(p.w_rec, rec_spectral_norm / s1);
  p.w_in = random_matrix(rng, n_rec, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  p.w_out = random_matrix(rng, n_out, n_rec, 1.0 / std::sqrt(static_cast<double>(n_rec)));
  if (kind.family == ModelKind::Family::kScalarGate) {
    p.w_rec_gate = random_matrix(rng, 1, n_rec, 1.0 / std::sqrt(static_cast<double>(n_rec)));
    p.w_in_gate = random_matrix(rng, 1, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  } else if (kind.family == ModelKind::Family::kMultiGate) {
    p.w_rec_gate = random_matrix(rng, n_rec, n_rec, 1.0 / std::sqrt(static_cast<double>(n_rec)));
    p.w_in_gate = random_matrix(rng, n_rec, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  }
  p.validate(kind);
  return p;
}

Trajectory forward(const ModelKind& kind, const Params& p,
                   const std::vector<std::vector<double>>& inputs,
                   std::span<const double> x0) {
  p.validate(kind);
  const std::size_t n = p.n_rec();
  const std::size_t horizon = inputs.size();
  if (!x0.empty() && x0.size() != n) {
    throw std::invalid_argument("forward: x0 dimension mismatch");
  }

  Trajectory traj;
  traj.states.resize(horizon + 1, std::vector<double>(n, 0.0));
  traj.preacts.resize(horizon, std::vector<double>(n, 0.0));
  traj.inputs = inputs;
  if (kind.gated()) {
    std::size_t gdim = kind.family == ModelKind::Family::kScalarGate ? 1 : n;
    traj.gate_preacts.resize(horizon, std::vector<double>(gdim, 0.0));
    traj.gates.resize(horizon, std::vector<double>(gdim, 0.0));
  }
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), traj.states[0].begin());
    for (double v : x0) {
      if (!std::isfinite(v)) throw DivergenceError(0, "forward: non-finite x0");
    }
  }

  for (std::size_t t = 0; t < horizon; ++t) {
    if (inputs[t].size() != p.n_in()) {
      throw std::invalid_argument("forward: input dimension mismatch at step " +
                                  std::to_string(t));
    }
    const auto& x = traj.states[t];
    auto& a = traj.preacts[t];
    matvec(p.w_rec, x, a);
    std::vector<double> drive(n, 0.0);
    matvec(p.w_in, inputs[t], drive);
    for (std::size_t i = 0; i < n; ++i) a[i] += drive[i];

    auto& next = traj.states[t + 1];
    switch (kind.family) {
      case ModelKind::Family::kPlain:
        for (std::size_t i = 0; i < n; ++i) {
          next[i] = activation_value(p.activation, a[i]);
        }
        break;
      case ModelKind::Family::kLeaky:
        for (std::size_t i = 0; i < n; ++i) {
          next[i] = kind.alpha * activation_value(p.activation, a[i]) +
                    (1.0 - kind.alpha) * x[i];
        }
        break;
      case ModelKind::Family::kScalarGate: {
        auto& ag = traj.gate_preacts[t];
        matvec(p.w_rec_gate, x, ag);
        double in_part = dot(p.w_in_gate.row(0), inputs[t]);
        ag[0] += in_part;
        double g = logistic(ag[0]);
        traj.gates[t][0] = g;
        for (std::size_t i = 0; i < n; ++i) {
          next[i] = g * activation_value(p.activation, a[i]) + (1.0 - g) * x[i];
        }
        break;
      }
      case ModelKind::Family::kMultiGate: {
        auto& ag = traj.gate_preacts[t];
        matvec(p.w_rec_gate, x, ag);
        std::vector<double> gdrive(n, 0.0);
        matvec(p.w_in_gate, inputs[t], gdrive);
        for (std::size_t i = 0; i < n; ++i) {
          ag[i] += gdrive[i];
          double g = logistic(ag[i]);
          traj.gates[t][i] = g;
          next[i] = g * activation_value(p.activation, a[i]) + (1.0 - g) * x[i];
        }
        break;
      }
    }
    for (double v : next) {
      if (!std::isfinite(v)) {
        throw DivergenceError(t + 1, "forward: non-finite state at step " +
                                         std::to_string(t + 1));
      }
    }
  }
  return traj;
}

std::vector<std::vector<double>> readout(const Params& p, const Trajectory& traj) {
  if (p.w_out.cols() != p.n_rec()) {
    throw std::invalid_argument("readout: w_out shape mismatch");
  }
  std::vector<std::vector<double>> z(traj.horizon(),
                                     std::vector<double>(p.n_out(), 0.0));
  for (std::size_t t = 1; t <= traj.horizon(); ++t) {
    matvec(p.w_out, traj.states[t], z[t - 1]);
  }
  return z;
}

JacobianDecomposition step_jacobian(const ModelKind& kind, const Params& p,
                                    const Trajectory& traj, std::size_t j) {
  if (j < 1 || j > traj.horizon()) {
    throw std::invalid_argument("step_jacobian: step out of range");
  }
  const std::size_t n = p.n_rec();
  const auto& a = traj.preacts[j - 1];
  const auto& x = traj.states[j - 1];

  std::vector<double> phid(n);
  for (std::size_t i = 0; i < n; ++i) phid[i] = activation_deriv(p.activation, a[i]);

  JacobianDecomposition out;
  out.dominant = Matrix(n, n);
  out.correction = Matrix(n, n);

  switch (kind.family) {
    case ModelKind::Family::kPlain:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < n; ++c) out.dominant(i, c) = phid[i] * p.w_rec(i, c);
      }
      break;
    case ModelKind::Family::kLeaky:
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < n; ++c) {
          out.dominant(i, c) = kind.alpha * phid[i] * p.w_rec(i, c);
        }
        out.dominant(i, i) += 1.0 - kind.alpha;
      }
      break;
    case ModelKind::Family::kScalarGate: {
      double g = traj.gates[j - 1][0];
      double sd = g * (1.0 - g);  // sigma'(a^g) = sigma (1 - sigma)
      for (std::size_t i = 0; i < n; ++i) {
        double d_i = activation_value(p.activation, a[i]) - x[i];
        for (std::size_t c = 0; c < n; ++c) {
          out.dominant(i, c) = g * phid[i] * p.w_rec(i, c);
          out.correction(i, c) = d_i * sd * p.w_rec_gate(0, c);
        }
        out.dominant(i, i) += 1.0 - g;
      }
      break;
    }
    case ModelKind::Family::kMultiGate: {
      const auto& g = traj.gates[j - 1];
      for (std::size_t i = 0; i < n; ++i) {
        double d_i = activation_value(p.activation, a[i]) - x[i];
        double sd_i = g[i] * (1.0 - g[i]);
        for (std::size_t c = 0; c < n; ++c) {
          out.dominant(i, c) = g[i] * phid[i] * p.w_rec(i, c);
          out.correction(i, c) = d_i * sd_i * p.w_rec_gate(i, c);
        }
        out.dominant(i, i) += 1.0 - g[i];
      }
      break;
    }
  }
  out.full = add(out.dominant, out.correction);
  return out;
}

JacobianProduct::JacobianProduct(std::span<const JacobianDecomposition> decomps,
                                 std::size_t k, std::size_t t)
    : decomps_(decomps), k_(k), t_(t) {
  if (k > t) throw std::invalid_argument("JacobianProduct: k > t");
  if (t > decomps.size()) {
    throw std::invalid_argument("JacobianProduct: steps not covered by decompositions");
  }
  dim_ = decomps.empty() ? 0 : decomps[0].full.rows();
  if (k == t && dim_ == 0) {
    throw std::invalid_argument("JacobianProduct: empty decomposition list");
  }
}

void JacobianProduct::apply(std::span<const double> x, std::span<double> y) const {
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> tmp(dim_);
  for (std::size_t j = k_ + 1; j <= t_; ++j) {
    matvec(decomps_[j - 1].full, cur, tmp);
    cur.swap(tmp);
  }
  std::copy(cur.begin(), cur.end(), y.begin());
}

void JacobianProduct::apply_transpose(std::span<const double> x,
                                      std::span<double> y) const {
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> tmp(dim_);
  for (std::size_t j = t_; j > k_; --j) {
    matvec_transpose(decomps_[j - 1].full, cur, tmp);
    cur.swap(tmp);
  }
  std::copy(cur.begin(), cur.end(), y.begin());
}

Matrix JacobianProduct::to_matrix() const {
  Matrix m = Matrix::identity(dim_);
  for (std::size_t j = k_ + 1; j <= t_; ++j) {
    m = matmul(decomps_[j - 1].full, m);
  }
  return m;
}

}  // namespace gatelab
