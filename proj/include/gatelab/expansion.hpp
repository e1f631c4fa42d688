// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_EXPANSION_HPP
#define GATELAB_EXPANSION_HPP

#include <optional>
#include <vector>

#include "gatelab/models.hpp"

namespace gatelab {

/// Factors of a structured-perturbation product prod_j (A_j + eps B_j),
/// factor j=1 leftmost.
struct FactorSequence {
  std::vector<Matrix> a_list;
  std::vector<Matrix> b_list;

  std::size_t size() const { return a_list.size(); }
  std::size_t dim() const { return a_list.empty() ? 0 : a_list[0].rows(); }
  void validate() const;
};

/// prod_{j=1}^{n} (A_j + eps B_j), evaluated left to right.
Matrix exact_product(const FactorSequence& fs, double eps);

/// prod A_j (the eps = 0 product).
Matrix zeroth_order_term(const FactorSequence& fs);

/// First-order coefficient L = sum_i (prod_{j<i} A_j) B_i (prod_{j>i} A_j),
/// empty products being the identity; T1(eps) = F(0) + eps * L.
Matrix first_order_term(const FactorSequence& fs);

/// Jacobian factors of the window k+1..t in product order, i.e. factor 1 is
/// step t's Jacobian so that exact_product(fs, 1) equals the explicit
/// transport matrix prod_{j=k+1}^{t} J_j. A_j is the dominant part, B_j the
/// gate correction (zero for plain/leaky).
FactorSequence decompose_model_jacobians(const ModelKind& kind, const Params& p,
                                         const Trajectory& traj, std::size_t k,
                                         std::size_t t);
FactorSequence decompose_model_jacobians(const ModelKind& kind, const Params& p,
                                         const Trajectory& traj);

/// Truncation-error diagnostics for the first-order expansion.
struct ExpansionReport {
  std::vector<double> eps_grid;       // ascending
  std::vector<double> errors;         // ||F(eps) - T1(eps)||_2
  std::vector<double> c2_values;      // errors / eps^2
  std::optional<FitResult> slope;     // log-log fit over the smallest eps
  bool exact = false;                 // T1 reproduces F for every eps
  std::vector<double> ratios;         // per-step ||B_j||_2 / ||A_j||_2
  double ratio_median = 0.0;
  double ratio_max = 0.0;
};

/// 12 log-spaced points in [1e-4, 1].
std::vector<double> default_eps_grid();

/// Evaluate errors and C2 on the grid, fit the log-log slope on the
/// `slope_points` smallest eps, and collect the per-step norm ratios at
/// eps = 1. An exactly reproduced product (n = 1 or all B zero) is flagged
/// `exact` and carries no slope.
ExpansionReport run_diagnostics(const FactorSequence& fs,
                                std::span<const double> eps_grid,
                                std::size_t slope_points = 6);

}  // namespace gatelab

#endif  // GATELAB_EXPANSION_HPP
