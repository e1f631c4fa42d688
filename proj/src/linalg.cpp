// SPDX-License-Identifier: Apache-2.0

#include "gatelab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gatelab/rng.hpp"

namespace gatelab {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: data size does not match rows*cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions do not match");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("sub: shape mismatch");
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.cols() || y.size() != a.rows()) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_transpose(const Matrix& a, std::span<const double> x,
                      std::span<double> y) {
  if (x.size() != a.rows() || y.size() != a.cols()) {
    throw std::invalid_argument("matvec_transpose: shape mismatch");
  }
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto row = a.row(i);
    double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < row.size(); ++j) y[j] += xi * row[j];
  }
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double spectral_norm_power(const LinearOperator& op, int iters,
                           std::uint64_t reseed) {
  if (op.rows() == 0 || op.cols() == 0) {
    throw std::invalid_argument("spectral_norm_power: empty operand");
  }
  if (iters < 1) throw std::invalid_argument("spectral_norm_power: iters < 1");

  const std::size_t n = op.cols();
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> w(op.rows(), 0.0);
  std::vector<double> u(n, 0.0);

  int restarts = 0;
  for (int it = 0; it < iters; ++it) {
    op.apply(v, w);
    op.apply_transpose(w, u);
    double nu = norm2(u);
    if (!std::isfinite(nu)) {
      throw std::invalid_argument("spectral_norm_power: non-finite input");
    }
    if (nu < 1e-300) {
      // Iterate collapsed: either the map annihilates this direction or the
      // map is (numerically) zero. Retry from a seeded random direction a
      // few times before concluding the norm is zero.
      if (++restarts > 3) return 0.0;
      CounterRng rng(reseed, static_cast<std::uint64_t>(restarts));
      for (double& vi : v) vi = rng.next_normal();
      double nv = norm2(v);
      for (double& vi : v) vi /= nv;
      --it;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = u[i] / nu;
  }
  op.apply(v, w);
  double s = norm2(w);
  if (!std::isfinite(s)) {
    throw std::invalid_argument("spectral_norm_power: non-finite input");
  }
  return s;
}

double spectral_norm_power(const Matrix& m, int iters, std::uint64_t reseed) {
  if (!m.all_finite()) {
    throw std::invalid_argument("spectral_norm_power: non-finite input");
  }
  MatrixOperator op(m);
  return spectral_norm_power(op, iters, reseed);
}

std::vector<double> svd_values(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("svd_values: empty matrix");
  }
  if (!m.all_finite()) {
    throw std::invalid_argument("svd_values: non-finite input");
  }

  // Hestenes one-sided Jacobi. We orthogonalize min(rows, cols) vectors; in
  // row-major storage the contiguous choice is the rows of the wide
  // orientation (rows of a wide matrix are the columns of its tall
  // transpose, and transposition preserves singular values).
  Matrix work = (m.rows() <= m.cols()) ? m : transpose(m);
  const std::size_t k = work.rows();

  // power-of-two prescale keeps the Gram dot products away from under/overflow
  // for extreme entry magnitudes; exact, so no precision is lost
  double magnitude = max_abs(work);
  if (magnitude == 0.0) return std::vector<double>(k, 0.0);
  const double prescale = std::exp2(-std::ilogb(magnitude));
  for (double& v : work.data()) v *= prescale;

  constexpr double kTol = 1e-15;
  constexpr int kMaxSweeps = 60;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        auto rp = work.row(p);
        auto rq = work.row(q);
        double app = dot(rp, rp);
        double aqq = dot(rq, rq);
        double apq = dot(rp, rq);
        if (std::abs(apq) <= kTol * std::sqrt(app * aqq)) continue;
        rotated = true;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (std::size_t j = 0; j < rp.size(); ++j) {
          double vp = rp[j];
          double vq = rq[j];
          rp[j] = c * vp - s * vq;
          rq[j] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(k);
  for (std::size_t i = 0; i < k; ++i) sigma[i] = norm2(work.row(i)) / prescale;
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

FitResult linfit_clipped(std::span<const double> x, std::span<const double> y,
                         double q_lo, double q_hi) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("linfit_clipped: length mismatch");
  }
  if (x.empty()) throw std::invalid_argument("linfit_clipped: empty data");

  double lo = quantile(x, q_lo);
  double hi = quantile(x, q_hi);
  std::vector<double> xs, ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= lo && x[i] <= hi) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  const std::size_t n = xs.size();
  if (n < 3) throw std::invalid_argument("linfit_clipped: degenerate fit");

  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xm += xs[i];
    ym += ys[i];
  }
  xm /= static_cast<double>(n);
  ym /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  if (sxx == 0.0) {
    throw std::invalid_argument("linfit_clipped: zero x-variance");
  }

  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  fit.n_points = n;

  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
    ss_res += r * r;
    ss_tot += (ys[i] - ym) * (ys[i] - ym);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.r_squared = std::clamp(fit.r_squared, 0.0, 1.0);
  return fit;
}

}  // namespace gatelab
