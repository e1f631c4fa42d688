// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_ANALYSIS_HPP
#define GATELAB_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "gatelab/bptt.hpp"
#include "gatelab/models.hpp"

namespace gatelab {

/// One lag-conditioned sensitivity sample: S is the spectral-norm estimate
/// of the transport prod_{j=k+1}^{t} J_j, P the gate-product predictor for
/// the same window.
struct SensitivityRecord {
  std::size_t t = 0;
  std::size_t k = 0;
  std::size_t lag = 0;
  double s = 0.0;
  double p = 0.0;
};

struct SensitivityTable {
  std::vector<SensitivityRecord> records;
};

/// (t, k) sampling policy per lag: everything when the pair count fits in
/// max_pairs, otherwise a seeded uniform subsample.
struct PairSampler {
  std::size_t max_pairs = 64;
  std::uint64_t seed = 0;

  /// k values to use for a given lag; pairs are (k + lag, k), k in [1, T-lag].
  std::vector<std::size_t> sample(std::size_t horizon, std::size_t lag) const;
};

/// Zeroth-order attenuation of the window (k, t]: alpha^(t-k) for leaky,
/// the product of gate values for the scalar gate, the neuron-mean of
/// per-neuron gate products for the multi gate, and 1 for plain.
double gate_product_predictor(const ModelKind& kind, const Trajectory& traj,
                              std::size_t k, std::size_t t);

/// Measure S and P for every probe sequence and every sampled (t, k) pair
/// of each requested lag. S uses `power_iters` power-method steps on the
/// lazily applied Jacobian product.
SensitivityTable sensitivity_table(const ModelKind& kind, const Params& p,
                                   const Batch& probe,
                                   std::span<const std::size_t> lags,
                                   const PairSampler& sampler = {},
                                   int power_iters = 5);

/// Lag-binned medians, all anchored to 1 at unit lag. `slope` is the
/// log S vs log P fit used by the fitted overlay; absent when the fit is
/// degenerate (e.g. P identically 1), in which case mu_predfit is NaN.
struct EffectiveLrProfile {
  std::vector<std::size_t> lags;
  std::vector<double> mu_eff;
  std::vector<double> mu_pred0;
  std::vector<double> mu_predfit;
  std::optional<FitResult> slope;
};

EffectiveLrProfile effective_lr_profile(const SensitivityTable& table);

/// Robust log-log regression of S on P over the central predictor range
/// (1%-99% quantiles of log P).
FitResult fit_slope(const SensitivityTable& table);

/// Singular-spectrum summary: AI_r = sigma_1/sigma_r (spectral spread),
/// CE_r = top-r fraction of squared singular mass. A zero sigma_r is
/// reported with ai_r = +inf and the rank_deficient flag.
struct SpectrumSummary {
  std::vector<double> sigma;
  double ai_r = 0.0;
  double ce_r = 0.0;
  std::size_t r = 0;
  bool rank_deficient = false;
};

SpectrumSummary spectrum_metrics(std::span<const double> sigma, std::size_t r);

/// Per-lag medians of AI_r and CE_r over explicit transport matrices
/// M_{t,k}, sampled as (sequence, t, k) triples.
struct LagAnisotropy {
  std::size_t lag = 0;
  double median_ai = 0.0;
  double median_ce = 0.0;
  std::size_t r = 0;
  std::size_t samples = 0;
};

std::vector<LagAnisotropy> jacobian_anisotropy_vs_lag(
    const ModelKind& kind, const Params& p, const Batch& probe,
    std::span<const std::size_t> lags, std::size_t r,
    const PairSampler& sampler = {});

/// Spectrum of the row-normalized, column-centered per-sample gradient
/// matrix. Pipeline order is fixed: build the m x p matrix, l2-normalize
/// rows (zero rows dropped and counted), mean-center columns, drop columns
/// whose post-centering std falls below 1e-12 of the largest column std,
/// add uniform jitter of 1e-10 x Frobenius norm, then SVD. `degenerate`
/// marks a matrix annihilated by centering (the spectrum is then jitter).
struct UpdateAnisotropy {
  SpectrumSummary spectrum;
  std::size_t m = 0;
  std::size_t p = 0;
  std::size_t dropped_cols = 0;
  std::size_t dropped_rows = 0;
  bool degenerate = false;
};

UpdateAnisotropy update_anisotropy(const ModelKind& kind, const Params& p,
                                   const Batch& probe, std::size_t r,
                                   std::uint64_t jitter_seed = 0);

/// The same pipeline starting from an already-built gradient matrix.
UpdateAnisotropy update_anisotropy_from_matrix(Matrix g, std::size_t r,
                                               std::uint64_t jitter_seed = 0);

}  // namespace gatelab

#endif  // GATELAB_ANALYSIS_HPP
