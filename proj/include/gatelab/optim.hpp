// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_OPTIM_HPP
#define GATELAB_OPTIM_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "gatelab/bptt.hpp"

namespace gatelab {

/// Adam moment estimates, flat over Params in the fixed flattening order.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;

  static AdamState zeros(std::size_t p) { return {std::vector<double>(p, 0.0),
                                                  std::vector<double>(p, 0.0), 0}; }
};

/// theta <- theta - mu * g (g already batch-averaged).
Params sgd_step(const Params& p, const GradientSet& g, double mu);

/// One Adam update with bias-corrected moments; increments the step count
/// first, per the usual convention.
std::pair<Params, AdamState> adam_step(const Params& p, const GradientSet& g,
                                       AdamState state, double mu, double beta1,
                                       double beta2, double eps);

}  // namespace gatelab

#endif  // GATELAB_OPTIM_HPP
