// SPDX-License-Identifier: Apache-2.0

#include "gatelab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gatelab {

namespace {

void check_shapes(const Params& p, const GradientSet& g) {
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
  };
  if (!same(p.w_rec, g.w_rec) || !same(p.w_in, g.w_in) ||
      !same(p.w_out, g.w_out) || !same(p.w_rec_gate, g.w_rec_gate) ||
      !same(p.w_in_gate, g.w_in_gate)) {
    throw std::invalid_argument("optimizer step: shape mismatch");
  }
}

template <typename Fn>
void for_each_param(Params& p, const GradientSet& g, Fn&& fn) {
  // Fixed flattening order: w_rec, w_in, w_out, w_rec_gate, w_in_gate.
  Matrix* pm[] = {&p.w_rec, &p.w_in, &p.w_out, &p.w_rec_gate, &p.w_in_gate};
  const Matrix* gm[] = {&g.w_rec, &g.w_in, &g.w_out, &g.w_rec_gate, &g.w_in_gate};
  std::size_t offset = 0;
  for (int m = 0; m < 5; ++m) {
    auto& pd = pm[m]->data();
    const auto& gd = gm[m]->data();
    for (std::size_t i = 0; i < pd.size(); ++i) fn(pd[i], gd[i], offset + i);
    offset += pd.size();
  }
}

}  // namespace

Params sgd_step(const Params& p, const GradientSet& g, double mu) {
  if (mu < 0.0) throw std::invalid_argument("sgd_step: mu must be >= 0");
  check_shapes(p, g);
  Params out = p;
  for_each_param(out, g, [mu](double& theta, double grad, std::size_t) {
    theta -= mu * grad;
  });
  return out;
}

std::pair<Params, AdamState> adam_step(const Params& p, const GradientSet& g,
                                       AdamState state, double mu, double beta1,
                                       double beta2, double eps) {
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam_step: betas must be in (0,1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("adam_step: eps must be > 0");
  check_shapes(p, g);
  const std::size_t dim = g.flat_dim();
  if (state.m.size() != dim || state.v.size() != dim) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));

  Params out = p;
  for_each_param(out, g, [&](double& theta, double grad, std::size_t i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad * grad;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    theta -= mu * mhat / (std::sqrt(vhat) + eps);
  });
  return {std::move(out), std::move(state)};
}

}  // namespace gatelab
