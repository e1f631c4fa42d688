// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "gatelab/bptt.hpp"
#include "gatelab/rng.hpp"

using namespace gatelab;

namespace {

Batch random_batch(std::uint64_t seed, std::size_t m, std::size_t steps,
                   std::size_t n_in, std::size_t n_out,
                   bool last_step_only = false) {
  CounterRng rng(seed);
  Batch b;
  b.inputs.resize(m);
  b.targets.resize(m);
  b.mask.assign(steps, last_step_only ? 0 : 1);
  if (last_step_only) b.mask[steps - 1] = 1;
  for (std::size_t i = 0; i < m; ++i) {
    b.inputs[i].resize(steps, std::vector<double>(n_in));
    b.targets[i].resize(steps, std::vector<double>(n_out));
    for (auto& u : b.inputs[i]) {
      for (double& v : u) v = rng.next_uniform(-1.0, 1.0);
    }
    for (auto& y : b.targets[i]) {
      for (double& v : y) v = rng.next_uniform(-1.0, 1.0);
    }
  }
  return b;
}

double max_rel_err(const GradientSet& got, const GradientSet& want) {
  auto ga = got.flatten();
  auto gb = want.flatten();
  double worst = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    worst = std::max(worst, std::abs(ga[i] - gb[i]) / (1e-8 + std::abs(gb[i])));
  }
  return worst;
}

}  // namespace

TEST_CASE("mse_loss basics") {
  std::vector<std::vector<double>> z{{1.0}, {2.0}, {3.0}};
  std::vector<std::uint8_t> mask{1, 1, 1};
  CHECK(mse_loss(z, z, mask) == 0.0);

  std::vector<std::vector<double>> target{{1.0}, {2.0}, {1.0}};
  std::vector<std::uint8_t> last_only{0, 0, 1};
  CHECK(mse_loss(z, target, last_only) == 4.0);  // (3-1)^2 on one masked scalar

  // hand recomputation on a mixed case
  std::vector<std::vector<double>> z2{{1.0, 2.0}, {0.0, -1.0}};
  std::vector<std::vector<double>> t2{{0.5, 2.5}, {1.0, 0.0}};
  std::vector<std::uint8_t> m2{1, 1};
  double expected = (0.25 + 0.25 + 1.0 + 1.0) / 4.0;
  CHECK(mse_loss(z2, t2, m2) == doctest::Approx(expected).epsilon(1e-15));

  std::vector<std::uint8_t> empty{0, 0, 0};
  CHECK_THROWS_WITH_AS(mse_loss(z, target, empty), "mse_loss: empty mask",
                       std::invalid_argument);
}

TEST_CASE("bptt_grad is zero when the model already fits the targets") {
  for (const ModelKind& kind : {ModelKind::plain(), ModelKind::scalar_gate()}) {
    Params p = init_params(kind, 3, 2, 1, 12);
    Batch b = random_batch(1, 2, 5, 2, 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      b.targets[i] = readout(p, forward(kind, p, b.inputs[i]));
    }
    double loss = -1.0;
    GradientSet g = bptt_grad(kind, p, b, &loss);
    CHECK(loss == 0.0);
    for (double v : g.flatten()) CHECK(v == 0.0);
  }
}

TEST_CASE("bptt_grad with a single step needs no jacobian transport") {
  ModelKind kind = ModelKind::multi_gate();
  Params p = init_params(kind, 3, 2, 1, 8);
  Batch b = random_batch(2, 1, 1, 2, 1);
  GradientSet g = bptt_grad(kind, p, b);
  GradientSet fd = fd_grad(kind, p, b, 1e-6);
  CHECK(max_rel_err(g, fd) < 1e-5);
}

TEST_CASE("bptt_grad matches central differences for every kind") {
  Batch b = random_batch(7, 3, 8, 2, 1);
  for (const ModelKind& kind : {ModelKind::plain(), ModelKind::leaky(0.6),
                                ModelKind::scalar_gate(), ModelKind::multi_gate()}) {
    Params p = init_params(kind, 4, 2, 1, 19);
    GradientSet g = bptt_grad(kind, p, b);
    GradientSet fd = fd_grad(kind, p, b, 1e-5);
    CHECK(max_rel_err(g, fd) < 1e-5);
  }
}

TEST_CASE("fd_grad on an analytically solvable single step") {
  // identity activation, one step, x0 = 0: z = w_out (w_rec*0 + w_in u),
  // L = (z - y)^2, so dL/dw_in(i,c) = 2 (z - y) w_out(0,i) u_c.
  ModelKind kind = ModelKind::plain();
  Params p;
  p.activation = Activation::kIdentity;
  p.w_rec = Matrix(2, 2, {0.3, -0.1, 0.2, 0.4});
  p.w_in = Matrix(2, 1, {0.7, -0.2});
  p.w_out = Matrix(1, 2, {1.5, -0.5});

  Batch b;
  b.inputs = {{{0.8}}};
  b.targets = {{{0.25}}};
  b.mask = {1};

  double z = 1.5 * (0.7 * 0.8) - 0.5 * (-0.2 * 0.8);
  GradientSet fd = fd_grad(kind, p, b, 1e-5);
  for (std::size_t i = 0; i < 2; ++i) {
    double analytic = 2.0 * (z - 0.25) * p.w_out(0, i) * 0.8;
    CHECK(fd.w_in(i, 0) == doctest::Approx(analytic).epsilon(1e-8));
  }
}

TEST_CASE("fd_grad error shrinks quadratically in h") {
  ModelKind kind = ModelKind::scalar_gate();
  Params p = init_params(kind, 4, 2, 1, 33);
  Batch b = random_batch(40, 2, 6, 2, 1);
  GradientSet exact = bptt_grad(kind, p, b);

  auto err = [&](double h) {
    GradientSet fd = fd_grad(kind, p, b, h);
    auto fa = fd.flatten();
    auto ea = exact.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      worst = std::max(worst, std::abs(fa[i] - ea[i]));
    }
    return worst;
  };
  double ratio = err(1e-3) / err(1e-4);
  CHECK(ratio > 30.0);
  CHECK(ratio < 300.0);
}

TEST_CASE("parameters with no effect on the loss get exactly zero gradient") {
  // second input channel is identically zero, so the matching w_in_gate
  // column cannot influence anything
  ModelKind kind = ModelKind::multi_gate();
  Params p = init_params(kind, 3, 2, 1, 40);
  Batch b = random_batch(41, 2, 5, 2, 1);
  for (auto& seq : b.inputs) {
    for (auto& u : seq) u[1] = 0.0;
  }
  GradientSet g = bptt_grad(kind, p, b);
  GradientSet fd = fd_grad(kind, p, b, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g.w_in_gate(i, 1) == 0.0);
    CHECK(fd.w_in_gate(i, 1) == 0.0);
  }
}

TEST_CASE("per_sample_grad_matrix rows") {
  ModelKind kind = ModelKind::scalar_gate();
  Params p = init_params(kind, 4, 2, 1, 50);

  // identical sequences produce identical rows
  Batch same = random_batch(51, 1, 6, 2, 1);
  same.inputs.push_back(same.inputs[0]);
  same.targets.push_back(same.targets[0]);
  Matrix rows = per_sample_grad_matrix(kind, p, same);
  for (std::size_t j = 0; j < rows.cols(); ++j) CHECK(rows(0, j) == rows(1, j));

  // mean of rows equals the batch gradient
  Batch b = random_batch(52, 5, 6, 2, 1);
  Matrix m = per_sample_grad_matrix(kind, p, b);
  auto flat = bptt_grad(kind, p, b).flatten();
  REQUIRE(flat.size() == m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= static_cast<double>(m.rows());
    CHECK(mean == doctest::Approx(flat[j]).epsilon(1e-12));
  }

  // spot-check one row against the finite-difference oracle on that sequence
  Batch one;
  one.inputs = {b.inputs[2]};
  one.targets = {b.targets[2]};
  one.mask = b.mask;
  auto fd = fd_grad(kind, p, one, 1e-5).flatten();
  for (std::size_t j = 0; j < m.cols(); ++j) {
    CHECK(std::abs(m(2, j) - fd[j]) / (1e-8 + std::abs(fd[j])) < 1e-5);
  }

  Batch too_small;
  too_small.inputs = {b.inputs[0]};
  too_small.targets = {b.targets[0]};
  too_small.mask = b.mask;
  CHECK_THROWS_AS(per_sample_grad_matrix(kind, p, too_small), std::invalid_argument);
}

TEST_CASE("gradients flow through gate parameters") {
  for (const ModelKind& kind : {ModelKind::scalar_gate(), ModelKind::multi_gate()}) {
    Params p = init_params(kind, 4, 2, 1, 60);
    Batch b = random_batch(61, 2, 6, 2, 1);
    GradientSet g = bptt_grad(kind, p, b);
    CHECK(max_abs(g.w_rec_gate) > 0.0);
    CHECK(max_abs(g.w_in_gate) > 0.0);
  }
}
