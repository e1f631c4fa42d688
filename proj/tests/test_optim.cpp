// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "gatelab/optim.hpp"
#include "gatelab/rng.hpp"

using namespace gatelab;

namespace {

// 1x1 scalar model: handy for hand-checkable traces
Params scalar_params(double theta) {
  Params p;
  p.w_rec = Matrix(1, 1, {theta});
  p.w_in = Matrix(1, 1, {0.0});
  p.w_out = Matrix(1, 1, {0.0});
  return p;
}

GradientSet scalar_grad(const Params& p, double g) {
  GradientSet gs = GradientSet::zeros_like(p);
  gs.w_rec(0, 0) = g;
  return gs;
}

}  // namespace

TEST_CASE("sgd_step arithmetic") {
  Params p = scalar_params(1.0);
  GradientSet g = scalar_grad(p, 2.0);

  Params unchanged = sgd_step(p, g, 0.0);
  CHECK(unchanged.w_rec(0, 0) == 1.0);

  Params stepped = sgd_step(p, g, 0.1);
  CHECK(stepped.w_rec(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("two sgd steps at constant gradient equal one summed step") {
  Params p = scalar_params(1.0);
  GradientSet g = scalar_grad(p, 0.25);  // dyadic, so the trace is exact
  Params two = sgd_step(sgd_step(p, g, 0.5), g, 0.5);
  Params one = sgd_step(p, g, 1.0);
  CHECK(two.w_rec(0, 0) == one.w_rec(0, 0));
}

TEST_CASE("sgd_step is linear in the gradient and the step size") {
  Params p = init_params(ModelKind::multi_gate(), 3, 2, 1, 77);
  GradientSet g = GradientSet::zeros_like(p);
  CounterRng rng(3);
  for (Matrix* m : {&g.w_rec, &g.w_in, &g.w_out, &g.w_rec_gate, &g.w_in_gate}) {
    for (double& v : m->data()) v = rng.next_normal();
  }
  auto delta = [&](const Params& a, const Params& b) {
    std::vector<double> out;
    auto fa = GradientSet{a.w_rec, a.w_in, a.w_out, a.w_rec_gate, a.w_in_gate}.flatten();
    auto fb = GradientSet{b.w_rec, b.w_in, b.w_out, b.w_rec_gate, b.w_in_gate}.flatten();
    for (std::size_t i = 0; i < fa.size(); ++i) out.push_back(fa[i] - fb[i]);
    return out;
  };
  GradientSet g2 = g;
  for (Matrix* m : {&g2.w_rec, &g2.w_in, &g2.w_out, &g2.w_rec_gate, &g2.w_in_gate}) {
    for (double& v : m->data()) v *= 2.0;
  }
  auto d1 = delta(sgd_step(p, g, 0.1), p);
  auto d2 = delta(sgd_step(p, g2, 0.1), p);
  auto d3 = delta(sgd_step(p, g, 0.2), p);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d2[i] == doctest::Approx(2.0 * d1[i]).epsilon(1e-14));
    CHECK(d3[i] == doctest::Approx(2.0 * d1[i]).epsilon(1e-14));
  }
}

TEST_CASE("sgd_step validates input") {
  Params p = scalar_params(1.0);
  GradientSet g = scalar_grad(p, 1.0);
  CHECK_THROWS_AS(sgd_step(p, g, -0.1), std::invalid_argument);
  GradientSet bad = g;
  bad.w_rec = Matrix(2, 2);
  CHECK_THROWS_AS(sgd_step(p, bad, 0.1), std::invalid_argument);
}

TEST_CASE("adam with zero gradients is a fixed point") {
  Params p = scalar_params(0.7);
  GradientSet g = scalar_grad(p, 0.0);
  AdamState state = AdamState::zeros(3);
  for (int i = 0; i < 5; ++i) {
    auto [next, ns] = adam_step(p, g, std::move(state), 0.01, 0.9, 0.999, 1e-8);
    CHECK(next.w_rec(0, 0) == 0.7);
    p = next;
    state = std::move(ns);
  }
  CHECK(state.step_count == 5);
}

TEST_CASE("first adam step moves by about -mu * sign(g)") {
  Params p = scalar_params(0.0);
  GradientSet g = scalar_grad(p, 5.0);
  auto [next, state] = adam_step(p, g, AdamState::zeros(3), 0.01, 0.9, 0.999, 1e-8);
  CHECK(std::abs(next.w_rec(0, 0) - (-0.01)) < 0.01 * 1e-6);

  GradientSet gn = scalar_grad(p, -5.0);
  auto [next2, state2] = adam_step(p, gn, AdamState::zeros(3), 0.01, 0.9, 0.999, 1e-8);
  CHECK(std::abs(next2.w_rec(0, 0) - 0.01) < 0.01 * 1e-6);
}

TEST_CASE("adam two-step trace matches the recurrence oracle") {
  const double mu = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Params p = scalar_params(0.0);
  AdamState state = AdamState::zeros(3);

  // independent scalar evaluation of the moment recurrences
  double m = 0.0, v = 0.0, theta = 0.0;
  double gs[2] = {1.0, -1.0};
  for (int l = 1; l <= 2; ++l) {
    double g = gs[l - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, l));
    double vhat = v / (1 - std::pow(b2, l));
    theta -= mu * mhat / (std::sqrt(vhat) + eps);

    auto [next, ns] = adam_step(p, scalar_grad(p, g), std::move(state), mu, b1, b2, eps);
    p = next;
    state = std::move(ns);
    CHECK(p.w_rec(0, 0) == doctest::Approx(theta).epsilon(1e-14));
  }
  // frozen values from an independent double-precision evaluation
  CHECK(std::abs(p.w_rec(0, 0) - (-0.00947368411578948)) < 1e-12);
  CHECK(state.step_count == 2);
}

TEST_CASE("adam per-coordinate step obeys the mhat/vhat bound") {
  Params p = init_params(ModelKind::scalar_gate(), 3, 2, 1, 11);
  GradientSet g = GradientSet::zeros_like(p);
  CounterRng rng(9);
  for (Matrix* m : {&g.w_rec, &g.w_in, &g.w_out, &g.w_rec_gate, &g.w_in_gate}) {
    for (double& v : m->data()) v = rng.next_normal();
  }
  const double mu = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto [next, state] = adam_step(p, g, AdamState::zeros(p.flat_dim()), mu, b1, b2, eps);

  auto before = GradientSet{p.w_rec, p.w_in, p.w_out, p.w_rec_gate, p.w_in_gate}.flatten();
  auto after = GradientSet{next.w_rec, next.w_in, next.w_out, next.w_rec_gate,
                           next.w_in_gate}.flatten();
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    double mhat = state.m[i] / (1 - b1);
    double vhat = state.v[i] / (1 - b2);
    double bound = mu * std::abs(mhat) / (std::sqrt(vhat) + eps);
    double step = std::abs(after[i] - before[i]);
    CHECK(step <= bound * (1 + 1e-12));
    worst_ratio = std::max(worst_ratio, step / (bound + 1e-300));
  }
  CHECK(worst_ratio <= 1.0 + 1e-12);
}

TEST_CASE("adam_step validates hyperparameters") {
  Params p = scalar_params(0.0);
  GradientSet g = scalar_grad(p, 1.0);
  CHECK_THROWS_AS(adam_step(p, g, AdamState::zeros(3), 0.01, 1.0, 0.999, 1e-8),
                  std::invalid_argument);
  CHECK_THROWS_AS(adam_step(p, g, AdamState::zeros(3), 0.01, 0.9, 0.999, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(adam_step(p, g, AdamState::zeros(7), 0.01, 0.9, 0.999, 1e-8),
                  std::invalid_argument);
}
