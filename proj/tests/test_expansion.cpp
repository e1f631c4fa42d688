// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "gatelab/expansion.hpp"
#include "gatelab/rng.hpp"

using namespace gatelab;

namespace {

Matrix random_matrix(CounterRng& rng, std::size_t n, double scale_factor = 1.0) {
  Matrix m(n, n);
  for (double& v : m.data()) v = scale_factor * rng.next_normal();
  return m;
}

FactorSequence random_factors(std::uint64_t seed, std::size_t n, std::size_t dim,
                              double b_scale) {
  CounterRng rng(seed);
  FactorSequence fs;
  for (std::size_t j = 0; j < n; ++j) {
    fs.a_list.push_back(random_matrix(rng, dim, 0.4));
    fs.b_list.push_back(random_matrix(rng, dim, b_scale));
  }
  return fs;
}

}  // namespace

TEST_CASE("exact_product: single factor and eps=0") {
  FactorSequence fs = random_factors(1, 1, 4, 0.2);
  Matrix at_half = exact_product(fs, 0.5);
  Matrix expected = add(fs.a_list[0], scale(fs.b_list[0], 0.5));
  CHECK(max_abs_diff(at_half, expected) == 0.0);

  FactorSequence fs3 = random_factors(2, 3, 4, 0.2);
  Matrix plain = exact_product(fs3, 0.0);
  Matrix manual = matmul(matmul(fs3.a_list[0], fs3.a_list[1]), fs3.a_list[2]);
  CHECK(max_abs_diff(plain, manual) <= 1e-14 * (1.0 + max_abs(manual)));
}

TEST_CASE("exact_product: three factors against direct multiplication") {
  FactorSequence fs = random_factors(3, 3, 4, 0.3);
  const double eps = 0.7;
  Matrix f0 = add(fs.a_list[0], scale(fs.b_list[0], eps));
  Matrix f1 = add(fs.a_list[1], scale(fs.b_list[1], eps));
  Matrix f2 = add(fs.a_list[2], scale(fs.b_list[2], eps));
  Matrix manual = matmul(matmul(f0, f1), f2);
  CHECK(max_abs_diff(exact_product(fs, eps), manual) <= 1e-13);
}

TEST_CASE("first_order_term: affine case and the n=2 analytic remainder") {
  FactorSequence one = random_factors(4, 1, 3, 0.5);
  CHECK(max_abs_diff(first_order_term(one), one.b_list[0]) == 0.0);
  // the expansion of a single affine factor is exact for every eps
  for (double eps : {0.1, 0.5, 1.0}) {
    Matrix t1 = add(one.a_list[0], scale(one.b_list[0], eps));
    CHECK(max_abs_diff(exact_product(one, eps), t1) == 0.0);
  }

  FactorSequence two = random_factors(5, 2, 4, 0.4);
  for (double eps : {0.25, 1.0}) {
    Matrix f = exact_product(two, eps);
    Matrix t1 = add(zeroth_order_term(two), scale(first_order_term(two), eps));
    Matrix remainder = sub(f, t1);
    Matrix analytic = scale(matmul(two.b_list[0], two.b_list[1]), eps * eps);
    CHECK(max_abs_diff(remainder, analytic) <= 1e-13);
  }
}

TEST_CASE("first_order_term: n=3 term-by-term structure") {
  FactorSequence fs = random_factors(6, 3, 4, 0.3);
  const auto& a = fs.a_list;
  const auto& b = fs.b_list;
  Matrix expected = matmul(matmul(b[0], a[1]), a[2]);
  expected = add(expected, matmul(matmul(a[0], b[1]), a[2]));
  expected = add(expected, matmul(matmul(a[0], a[1]), b[2]));
  CHECK(max_abs_diff(first_order_term(fs), expected) <= 1e-13);
}

TEST_CASE("first_order_term is additive in the perturbations") {
  FactorSequence fs1 = random_factors(7, 4, 3, 0.2);
  FactorSequence fs2 = fs1;
  CounterRng rng(8);
  for (auto& b : fs2.b_list) b = random_matrix(rng, 3, 0.2);
  FactorSequence sum = fs1;
  for (std::size_t j = 0; j < sum.size(); ++j) {
    sum.b_list[j] = add(fs1.b_list[j], fs2.b_list[j]);
  }
  Matrix lhs = first_order_term(sum);
  Matrix rhs = add(first_order_term(fs1), first_order_term(fs2));
  CHECK(max_abs_diff(lhs, rhs) <= 1e-13);
}

TEST_CASE("all-zero perturbations reduce exact_product to the plain product") {
  FactorSequence fs = random_factors(9, 5, 3, 0.0);
  for (auto& b : fs.b_list) b = Matrix(3, 3);
  Matrix plain = zeroth_order_term(fs);
  for (double eps : {0.0, 0.3, 1.0}) {
    CHECK(max_abs_diff(exact_product(fs, eps), plain) == 0.0);
  }
}

TEST_CASE("decompose_model_jacobians: ungated and zero-gate models have zero B") {
  CounterRng rng(10);
  std::vector<std::vector<double>> inputs(6, std::vector<double>(2));
  for (auto& u : inputs) {
    for (double& v : u) v = rng.next_uniform(-1.0, 1.0);
  }

  Params leaky = init_params(ModelKind::leaky(0.7), 4, 2, 1, 11);
  Trajectory tl = forward(ModelKind::leaky(0.7), leaky, inputs);
  FactorSequence fl = decompose_model_jacobians(ModelKind::leaky(0.7), leaky, tl);
  for (const auto& b : fl.b_list) CHECK(max_abs(b) == 0.0);

  Params sg = init_params(ModelKind::scalar_gate(), 4, 2, 1, 12);
  for (double& v : sg.w_rec_gate.data()) v = 0.0;
  Trajectory ts = forward(ModelKind::scalar_gate(), sg, inputs);
  FactorSequence fsg = decompose_model_jacobians(ModelKind::scalar_gate(), sg, ts);
  for (const auto& b : fsg.b_list) CHECK(max_abs(b) == 0.0);
}

TEST_CASE("decompose_model_jacobians reconstructs the transport at eps=1") {
  CounterRng rng(13);
  std::vector<std::vector<double>> inputs(10, std::vector<double>(2));
  for (auto& u : inputs) {
    for (double& v : u) v = rng.next_uniform(-1.0, 1.0);
  }
  for (const ModelKind& kind : {ModelKind::scalar_gate(), ModelKind::multi_gate()}) {
    Params p = init_params(kind, 5, 2, 1, 14);
    Trajectory traj = forward(kind, p, inputs);
    std::vector<JacobianDecomposition> decomps;
    for (std::size_t j = 1; j <= 10; ++j) decomps.push_back(step_jacobian(kind, p, traj, j));

    for (auto [k, t] : {std::pair<std::size_t, std::size_t>{0, 10}, {3, 8}, {4, 5}}) {
      FactorSequence fs = decompose_model_jacobians(kind, p, traj, k, t);
      CHECK(fs.size() == t - k);
      Matrix via_expansion = exact_product(fs, 1.0);
      Matrix via_product = JacobianProduct(decomps, k, t).to_matrix();
      double ref = frobenius_norm(via_product);
      CHECK(max_abs_diff(via_expansion, via_product) <= 1e-10 * (ref + 1.0));
    }
  }
}

TEST_CASE("run_diagnostics: exact case reports no slope") {
  FactorSequence one = random_factors(15, 1, 3, 0.4);
  auto grid = default_eps_grid();
  ExpansionReport report = run_diagnostics(one, grid);
  CHECK(report.exact);
  CHECK(!report.slope.has_value());
  for (double err : report.errors) CHECK(err == 0.0);
}

TEST_CASE("run_diagnostics: n=2 gives slope 2 and constant C2") {
  FactorSequence two = random_factors(16, 2, 4, 0.3);
  auto grid = default_eps_grid();
  ExpansionReport report = run_diagnostics(two, grid);
  REQUIRE(report.slope.has_value());
  CHECK(report.slope->slope == doctest::Approx(2.0).epsilon(1e-6));
  double c2_expected = svd_values(matmul(two.b_list[0], two.b_list[1]))[0];
  for (double c2 : report.c2_values) {
    CHECK(c2 == doctest::Approx(c2_expected).epsilon(1e-6));
  }
}

TEST_CASE("run_diagnostics: C2 plateaus at small eps for generic factors") {
  FactorSequence fs = random_factors(17, 8, 4, 0.05);
  auto grid = default_eps_grid();
  ExpansionReport report = run_diagnostics(fs, grid);
  REQUIRE(report.c2_values.size() >= 2);
  double a = report.c2_values[0], b = report.c2_values[1];
  double spread = std::abs(a - b) / (0.5 * (a + b));
  CHECK(spread < 0.10);
  REQUIRE(report.slope.has_value());
  CHECK(report.slope->slope > 1.9);
  CHECK(report.slope->slope < 2.1);
}

TEST_CASE("run_diagnostics: ratio statistics at eps=1") {
  FactorSequence fs = random_factors(18, 5, 3, 0.1);
  auto grid = default_eps_grid();
  ExpansionReport report = run_diagnostics(fs, grid);
  REQUIRE(report.ratios.size() == 5);
  std::vector<double> manual;
  for (std::size_t j = 0; j < 5; ++j) {
    manual.push_back(svd_values(fs.b_list[j])[0] / svd_values(fs.a_list[j])[0]);
    CHECK(report.ratios[j] == doctest::Approx(manual[j]).epsilon(1e-12));
  }
  CHECK(report.ratio_median == doctest::Approx(median(manual)).epsilon(1e-12));
  CHECK(report.ratio_max ==
        doctest::Approx(*std::max_element(manual.begin(), manual.end())).epsilon(1e-12));
}

TEST_CASE("run_diagnostics validates the grid") {
  FactorSequence fs = random_factors(19, 2, 3, 0.2);
  std::vector<double> bad{0.1, 0.1};
  CHECK_THROWS_AS(run_diagnostics(fs, bad), std::invalid_argument);
  std::vector<double> nonpos{0.0, 0.1};
  CHECK_THROWS_AS(run_diagnostics(fs, nonpos), std::invalid_argument);
}

TEST_CASE("factor sequence shape validation") {
  FactorSequence fs;
  fs.a_list.push_back(Matrix(2, 2));
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
  fs.b_list.push_back(Matrix(3, 3));
  CHECK_THROWS_AS(fs.validate(), std::invalid_argument);
}
