// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "gatelab/linalg.hpp"
#include "gatelab/rng.hpp"

using namespace gatelab;

namespace {

Matrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.next_normal();
  return m;
}

}  // namespace

TEST_CASE("spectral_norm_power on diagonal and identity operands") {
  Matrix d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(spectral_norm_power(d, 20) == doctest::Approx(3.0).epsilon(1e-9));

  Matrix id = Matrix::identity(8);
  CHECK(spectral_norm_power(id, 1) == 1.0);
}

TEST_CASE("spectral_norm_power converges to the full-SVD sigma1") {
  Matrix m = random_matrix(13, 16, 16);
  double sigma1 = svd_values(m)[0];
  double est = spectral_norm_power(m, 50);
  CHECK(std::abs(est - sigma1) / sigma1 < 1e-6);
}

TEST_CASE("spectral_norm_power rejects non-finite entries") {
  Matrix m(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(spectral_norm_power(m, 5),
                       "spectral_norm_power: non-finite input",
                       std::invalid_argument);
}

TEST_CASE("spectral_norm_power estimate is non-decreasing in iteration count "
          "for symmetric PSD operands") {
  Matrix b = random_matrix(7, 6, 6);
  Matrix psd = matmul(transpose(b), b);
  double prev = 0.0;
  for (int k = 1; k <= 12; ++k) {
    double est = spectral_norm_power(psd, k);
    CHECK(est >= prev - 1e-12);
    prev = est;
  }
}

TEST_CASE("spectral_norm_power handles the zero matrix") {
  Matrix z(4, 4);
  CHECK(spectral_norm_power(z, 5) == 0.0);
}

TEST_CASE("svd_values of diagonal and zero matrices") {
  Matrix d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = -5.0;
  auto sigma = svd_values(d);
  REQUIRE(sigma.size() == 2);
  CHECK(sigma[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(sigma[1] == doctest::Approx(2.0).epsilon(1e-12));

  auto zeros = svd_values(Matrix(3, 5));
  REQUIRE(zeros.size() == 3);
  for (double s : zeros) CHECK(s == 0.0);
}

TEST_CASE("svd_values satisfies the Frobenius identity") {
  using Shape = std::tuple<std::size_t, std::size_t, std::uint64_t>;
  for (auto [rows, cols, seed] :
       {Shape{10, 6, 1}, Shape{6, 10, 2}, Shape{12, 12, 3}, Shape{1, 7, 4}}) {
    Matrix m = random_matrix(seed, rows, cols);
    auto sigma = svd_values(m);
    REQUIRE(sigma.size() == std::min(rows, cols));
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      sum_sq += sigma[i] * sigma[i];
      if (i > 0) CHECK(sigma[i] <= sigma[i - 1]);
      CHECK(sigma[i] >= 0.0);
    }
    double fro = frobenius_norm(m);
    CHECK(std::abs(sum_sq - fro * fro) <= 1e-10 * fro * fro);
  }
}

TEST_CASE("svd_values survives extreme entry magnitudes") {
  Matrix tiny(2, 2);
  tiny(0, 0) = 1e-200;
  tiny(1, 1) = 3e-200;
  auto st = svd_values(tiny);
  CHECK(st[0] == doctest::Approx(3e-200).epsilon(1e-12));
  CHECK(st[1] == doctest::Approx(1e-200).epsilon(1e-12));

  Matrix huge(2, 2);
  huge(0, 0) = 1e150;
  huge(0, 1) = -2e150;
  huge(1, 0) = 2e150;
  huge(1, 1) = 1e150;  // orthogonal columns, both norms sqrt(5)e150
  auto sh = svd_values(huge);
  CHECK(sh[0] == doctest::Approx(std::sqrt(5.0) * 1e150).epsilon(1e-12));
  CHECK(sh[1] == doctest::Approx(std::sqrt(5.0) * 1e150).epsilon(1e-12));
}

TEST_CASE("svd_values rejects non-finite input") {
  Matrix m(2, 3);
  m(1, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd_values(m), std::invalid_argument);
}

TEST_CASE("linfit_clipped recovers exact lines") {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(0.1 * i);
    y.push_back(0.05 * i);  // y = 0.5 x
  }
  for (auto [lo, hi] :
       {std::pair<double, double>{0.0, 1.0}, {0.1, 0.9}, {0.25, 0.75}}) {
    FitResult fit = linfit_clipped(x, y, lo, hi);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::fill(y.begin(), y.end(), 3.25);
  FitResult flat = linfit_clipped(x, y, 0.0, 1.0);
  CHECK(flat.slope == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("linfit_clipped matches the closed-form OLS oracle on noisy data") {
  CounterRng rng(99);
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    double xi = rng.next_uniform(0.0, 5.0);
    x.push_back(xi);
    y.push_back(2.0 * xi + 0.01 * rng.next_normal());
  }

  // closed-form OLS
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(x.size());
  ym /= static_cast<double>(y.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  double oracle_slope = sxy / sxx;

  FitResult fit = linfit_clipped(x, y, 0.0, 1.0);
  CHECK(fit.slope == doctest::Approx(oracle_slope).epsilon(1e-12));
  CHECK(fit.n_points == x.size());
  CHECK(fit.slope > 1.98);
  CHECK(fit.slope < 2.02);
}

TEST_CASE("linfit_clipped error paths") {
  std::vector<double> x{1.0, 2.0}, y{1.0, 2.0};
  CHECK_THROWS_WITH_AS(linfit_clipped(x, y, 0.0, 1.0),
                       "linfit_clipped: degenerate fit", std::invalid_argument);

  std::vector<double> xc{1.0, 1.0, 1.0, 1.0}, yc{1.0, 2.0, 3.0, 4.0};
  CHECK_THROWS_WITH_AS(linfit_clipped(xc, yc, 0.0, 1.0),
                       "linfit_clipped: zero x-variance", std::invalid_argument);

  // heavy clipping can leave too few points
  std::vector<double> xl{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK_THROWS_AS(linfit_clipped(xl, xl, 0.49, 0.51), std::invalid_argument);
}

TEST_CASE("median and quantile conventions") {
  std::vector<double> odd{3.0, 1.0, 2.0};
  CHECK(median(odd) == 2.0);
  std::vector<double> even{4.0, 1.0, 2.0, 3.0};
  CHECK(median(even) == 2.5);
  CHECK(quantile(even, 0.0) == 1.0);
  CHECK(quantile(even, 1.0) == 4.0);
  CHECK(quantile(even, 0.5) == 2.5);
}
