// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_LINALG_HPP
#define GATELAB_LINALG_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gatelab {

/// Dense real matrix, 64-bit floats, row-major.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  /// Row i as a contiguous span.
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

/// y = A x
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
/// y = A^T x
void matvec_transpose(const Matrix& a, std::span<const double> x, std::span<double> y);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Abstract linear map; lets power iteration run on products of factors
/// without ever forming the product matrix.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t cols() const = 0;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void apply_transpose(std::span<const double> x, std::span<double> y) const = 0;
};

/// LinearOperator view of a plain matrix. Non-owning.
class MatrixOperator final : public LinearOperator {
 public:
  explicit MatrixOperator(const Matrix& m) : m_(&m) {}
  std::size_t rows() const override { return m_->rows(); }
  std::size_t cols() const override { return m_->cols(); }
  void apply(std::span<const double> x, std::span<double> y) const override {
    matvec(*m_, x, y);
  }
  void apply_transpose(std::span<const double> x, std::span<double> y) const override {
    matvec_transpose(*m_, x, y);
  }

 private:
  const Matrix* m_;
};

/// Largest-singular-value estimate by power iteration on A^T A.
///
/// The starting vector is the normalized all-ones vector, so the estimate is
/// deterministic. Each iteration applies A then A^T once; the returned value
/// after k iterations is ||A v_k|| with v_k the normalized iterate, which is
/// non-decreasing in k. If the iterate norm collapses below 1e-300 the
/// vector is re-randomized from `reseed`; a map that keeps annihilating the
/// iterate is reported as 0.
double spectral_norm_power(const LinearOperator& op, int iters,
                           std::uint64_t reseed = 0);
double spectral_norm_power(const Matrix& m, int iters, std::uint64_t reseed = 0);

/// All singular values, descending. One-sided Jacobi (Hestenes) on the
/// orientation with fewer vectors to orthogonalize; geared for accuracy on
/// the small dense matrices used here, not speed.
std::vector<double> svd_values(const Matrix& m);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

/// Ordinary least squares restricted to points whose x lies inside the
/// [q_lo, q_hi] quantile band of x. q_lo=0, q_hi=1 is plain OLS.
FitResult linfit_clipped(std::span<const double> x, std::span<const double> y,
                         double q_lo, double q_hi);

/// Interpolated quantile (linear between order statistics) of unsorted data.
double quantile(std::span<const double> values, double q);

/// Median (midpoint convention for even counts).
double median(std::span<const double> values);

}  // namespace gatelab

#endif  // GATELAB_LINALG_HPP
