// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_MODELS_HPP
#define GATELAB_MODELS_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gatelab/linalg.hpp"

namespace gatelab {

/// Forward pass produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

enum class Activation { kTanh, kIdentity };

double activation_value(Activation act, double a);
double activation_deriv(Activation act, double a);
double logistic(double x);

/// Which state update rule a network follows. `alpha` is meaningful only
/// for the leaky family.
struct ModelKind {
  enum class Family { kPlain, kLeaky, kScalarGate, kMultiGate };

  Family family = Family::kPlain;
  double alpha = 1.0;

  static ModelKind plain() { return {Family::kPlain, 1.0}; }
  static ModelKind leaky(double alpha);
  static ModelKind scalar_gate() { return {Family::kScalarGate, 1.0}; }
  static ModelKind multi_gate() { return {Family::kMultiGate, 1.0}; }

  bool gated() const {
    return family == Family::kScalarGate || family == Family::kMultiGate;
  }
  std::string name() const;
  static ModelKind from_name(const std::string& name, double alpha);
};

/// All weights of one network instance. Gate matrices are empty for the
/// plain and leaky families.
struct Params {
  Matrix w_rec;       // n_rec x n_rec
  Matrix w_in;        // n_rec x n_in
  Matrix w_out;       // n_out x n_rec
  Matrix w_rec_gate;  // 1 x n_rec (scalar gate) or n_rec x n_rec (multi gate)
  Matrix w_in_gate;   // 1 x n_in or n_rec x n_in
  Activation activation = Activation::kTanh;

  std::size_t n_rec() const { return w_rec.rows(); }
  std::size_t n_in() const { return w_in.cols(); }
  std::size_t n_out() const { return w_out.rows(); }

  /// Total number of scalar parameters (gate matrices included when present).
  std::size_t flat_dim() const;

  void validate(const ModelKind& kind) const;
};

/// Random initialization: recurrent weights i.i.d. normal rescaled so the
/// largest singular value is `rec_spectral_norm` (default 0.9, a
/// contractive start); all other weights i.i.d. normal with std
/// 1/sqrt(fan_in).
Params init_params(const ModelKind& kind, std::size_t n_rec, std::size_t n_in,
                   std::size_t n_out, std::uint64_t seed,
                   Activation activation = Activation::kTanh,
                   double rec_spectral_norm = 0.9);

/// One sequence worth of states, pre-activations and gate values.
/// states[0] is x_0; states[t] for t in [1, T] the evolved state;
/// preacts[t], gate_preacts[t], gates[t], inputs[t] belong to the update
/// that produced states[t+1].
struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> preacts;
  std::vector<std::vector<double>> gate_preacts;  // empty for ungated kinds
  std::vector<std::vector<double>> gates;         // values strictly in (0,1)
  std::vector<std::vector<double>> inputs;

  std::size_t horizon() const { return preacts.size(); }
};

/// Run the state update for the whole input sequence. Throws
/// DivergenceError naming the step if a state goes non-finite.
Trajectory forward(const ModelKind& kind, const Params& p,
                   const std::vector<std::vector<double>>& inputs,
                   std::span<const double> x0 = {});

/// z_t = W^o x_t for t = 1..T; entry [t-1] corresponds to state t.
std::vector<std::vector<double>> readout(const Params& p, const Trajectory& traj);

/// One step's Jacobian J_j = dx_j / dx_{j-1} split into the gate-scaled
/// main dynamics (identity leakage included) and the gate-gradient
/// correction, which is zero for the plain and leaky families, rank-1 for
/// the scalar gate and generically full-rank for the multi gate.
struct JacobianDecomposition {
  Matrix full;
  Matrix dominant;
  Matrix correction;
};

JacobianDecomposition step_jacobian(const ModelKind& kind, const Params& p,
                                    const Trajectory& traj, std::size_t j);

/// Lazy transport map prod_{j=k+1}^{t} J_j (J_{k+1} applied first). Holds a
/// non-owning view of the caller's decompositions, which must cover steps
/// 1..T (entry j-1 for step j) and outlive the product. k == t is the
/// identity map.
class JacobianProduct final : public LinearOperator {
 public:
  JacobianProduct(std::span<const JacobianDecomposition> decomps, std::size_t k,
                  std::size_t t);

  std::size_t rows() const override { return dim_; }
  std::size_t cols() const override { return dim_; }
  void apply(std::span<const double> x, std::span<double> y) const override;
  void apply_transpose(std::span<const double> x, std::span<double> y) const override;

  /// Explicit product matrix (identity when k == t).
  Matrix to_matrix() const;

  std::size_t length() const { return t_ - k_; }

 private:
  std::span<const JacobianDecomposition> decomps_;
  std::size_t k_ = 0;
  std::size_t t_ = 0;
  std::size_t dim_ = 0;
};

}  // namespace gatelab

#endif  // GATELAB_MODELS_HPP
