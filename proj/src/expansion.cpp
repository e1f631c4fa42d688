// SPDX-License-Identifier: Apache-2.0

#include "gatelab/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gatelab {

void FactorSequence::validate() const {
  if (a_list.empty() || a_list.size() != b_list.size()) {
    throw std::invalid_argument("FactorSequence: need equal, non-empty factor lists");
  }
  const std::size_t d = dim();
  for (const auto& m : a_list) {
    if (m.rows() != d || m.cols() != d) {
      throw std::invalid_argument("FactorSequence: inconsistent shapes");
    }
  }
  for (const auto& m : b_list) {
    if (m.rows() != d || m.cols() != d) {
      throw std::invalid_argument("FactorSequence: inconsistent shapes");
    }
  }
}

Matrix exact_product(const FactorSequence& fs, double eps) {
  fs.validate();
  Matrix m = add(fs.a_list[0], scale(fs.b_list[0], eps));
  for (std::size_t j = 1; j < fs.size(); ++j) {
    m = matmul(m, add(fs.a_list[j], scale(fs.b_list[j], eps)));
  }
  return m;
}

Matrix zeroth_order_term(const FactorSequence& fs) {
  fs.validate();
  Matrix m = fs.a_list[0];
  for (std::size_t j = 1; j < fs.size(); ++j) m = matmul(m, fs.a_list[j]);
  return m;
}

Matrix first_order_term(const FactorSequence& fs) {
  fs.validate();
  const std::size_t n = fs.size();
  const std::size_t d = fs.dim();

  // prefix[i] = A_1 ... A_i, suffix[i] = A_{i+1} ... A_n
  std::vector<Matrix> prefix(n + 1), suffix(n + 1);
  prefix[0] = Matrix::identity(d);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = matmul(prefix[i], fs.a_list[i]);
  suffix[n] = Matrix::identity(d);
  for (std::size_t i = n; i > 0; --i) suffix[i - 1] = matmul(fs.a_list[i - 1], suffix[i]);

  Matrix total(d, d);
  for (std::size_t i = 1; i <= n; ++i) {
    Matrix term = matmul(prefix[i - 1], matmul(fs.b_list[i - 1], suffix[i]));
    total = add(total, term);
  }
  return total;
}

FactorSequence decompose_model_jacobians(const ModelKind& kind, const Params& p,
                                         const Trajectory& traj, std::size_t k,
                                         std::size_t t) {
  if (k >= t || t > traj.horizon()) {
    throw std::invalid_argument("decompose_model_jacobians: bad window");
  }
  FactorSequence fs;
  fs.a_list.reserve(t - k);
  fs.b_list.reserve(t - k);
  // Transport applies J_{k+1} first (rightmost factor), so factor 1 of the
  // written-out product is step t's Jacobian.
  for (std::size_t j = t; j > k; --j) {
    JacobianDecomposition d = step_jacobian(kind, p, traj, j);
    fs.a_list.push_back(std::move(d.dominant));
    fs.b_list.push_back(std::move(d.correction));
  }
  return fs;
}

FactorSequence decompose_model_jacobians(const ModelKind& kind, const Params& p,
                                         const Trajectory& traj) {
  return decompose_model_jacobians(kind, p, traj, 0, traj.horizon());
}

std::vector<double> default_eps_grid() {
  std::vector<double> grid(12);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double f = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    grid[i] = std::pow(10.0, -4.0 + 4.0 * f);
  }
  grid.back() = 1.0;
  return grid;
}

ExpansionReport run_diagnostics(const FactorSequence& fs,
                                std::span<const double> eps_grid,
                                std::size_t slope_points) {
  fs.validate();
  if (eps_grid.empty()) throw std::invalid_argument("run_diagnostics: empty grid");
  for (std::size_t i = 0; i + 1 < eps_grid.size(); ++i) {
    if (!(eps_grid[i] < eps_grid[i + 1])) {
      throw std::invalid_argument("run_diagnostics: grid must be ascending");
    }
  }
  if (!(eps_grid.front() > 0.0)) {
    throw std::invalid_argument("run_diagnostics: eps must be positive");
  }

  ExpansionReport report;
  report.eps_grid.assign(eps_grid.begin(), eps_grid.end());

  Matrix f0 = zeroth_order_term(fs);
  Matrix l1 = first_order_term(fs);
  for (double eps : eps_grid) {
    Matrix t1 = add(f0, scale(l1, eps));
    Matrix diff = sub(exact_product(fs, eps), t1);
    double err = max_abs(diff) == 0.0 ? 0.0 : svd_values(diff)[0];
    report.errors.push_back(err);
    report.c2_values.push_back(err / (eps * eps));
  }

  for (std::size_t j = 0; j < fs.size(); ++j) {
    double na = svd_values(fs.a_list[j])[0];
    double nb = max_abs(fs.b_list[j]) == 0.0 ? 0.0 : svd_values(fs.b_list[j])[0];
    report.ratios.push_back(na > 0.0 ? nb / na
                                     : (nb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  report.ratio_median = median(report.ratios);
  report.ratio_max = *std::max_element(report.ratios.begin(), report.ratios.end());

  report.exact = *std::max_element(report.errors.begin(), report.errors.end()) == 0.0;
  if (!report.exact) {
    std::size_t npts = std::min(slope_points, report.errors.size());
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < npts; ++i) {
      if (report.errors[i] > 0.0) {
        lx.push_back(std::log(report.eps_grid[i]));
        ly.push_back(std::log(report.errors[i]));
      }
    }
    if (lx.size() >= 3) report.slope = linfit_clipped(lx, ly, 0.0, 1.0);
  }
  return report;
}

}  // namespace gatelab
