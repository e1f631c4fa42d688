// SPDX-License-Identifier: Apache-2.0

#include "gatelab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gatelab/rng.hpp"

namespace gatelab {

std::vector<std::size_t> PairSampler::sample(std::size_t horizon,
                                             std::size_t lag) const {
  if (lag < 1 || lag >= horizon) {
    throw std::invalid_argument("PairSampler: lag outside [1, horizon-1]");
  }
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k + lag <= horizon; ++k) ks.push_back(k);
  if (ks.size() <= max_pairs) return ks;
  // seeded Fisher-Yates prefix, then restore order
  CounterRng rng(seed, lag);
  for (std::size_t i = 0; i < max_pairs; ++i) {
    std::size_t j = i + rng.next_below(ks.size() - i);
    std::swap(ks[i], ks[j]);
  }
  ks.resize(max_pairs);
  std::sort(ks.begin(), ks.end());
  return ks;
}

double gate_product_predictor(const ModelKind& kind, const Trajectory& traj,
                              std::size_t k, std::size_t t) {
  if (k >= t || t > traj.horizon()) {
    throw std::invalid_argument("gate_product_predictor: need k < t <= horizon");
  }
  switch (kind.family) {
    case ModelKind::Family::kPlain:
      return 1.0;
    case ModelKind::Family::kLeaky:
      return std::pow(kind.alpha, static_cast<double>(t - k));
    case ModelKind::Family::kScalarGate: {
      double prod = 1.0;
      for (std::size_t j = k + 1; j <= t; ++j) prod *= traj.gates[j - 1][0];
      return prod;
    }
    case ModelKind::Family::kMultiGate: {
      const std::size_t n = traj.gates[0].size();
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t j = k + 1; j <= t; ++j) prod *= traj.gates[j - 1][i];
        acc += prod;
      }
      return acc / static_cast<double>(n);
    }
  }
  return 1.0;
}

SensitivityTable sensitivity_table(const ModelKind& kind, const Params& p,
                                   const Batch& probe,
                                   std::span<const std::size_t> lags,
                                   const PairSampler& sampler, int power_iters) {
  probe.validate();
  const std::size_t horizon = probe.horizon();
  for (std::size_t lag : lags) {
    if (lag < 1 || lag >= horizon) {
      throw std::invalid_argument("sensitivity_table: lag outside [1, T-1]");
    }
  }

  SensitivityTable table;
  for (std::size_t seq = 0; seq < probe.size(); ++seq) {
    Trajectory traj = forward(kind, p, probe.inputs[seq]);
    std::vector<JacobianDecomposition> decomps;
    decomps.reserve(horizon);
    for (std::size_t j = 1; j <= horizon; ++j) {
      decomps.push_back(step_jacobian(kind, p, traj, j));
    }
    for (std::size_t lag : lags) {
      for (std::size_t k : sampler.sample(horizon, lag)) {
        std::size_t t = k + lag;
        JacobianProduct prod(decomps, k, t);
        SensitivityRecord rec;
        rec.t = t;
        rec.k = k;
        rec.lag = lag;
        rec.s = spectral_norm_power(prod, power_iters, sampler.seed);
        rec.p = gate_product_predictor(kind, traj, k, t);
        table.records.push_back(rec);
      }
    }
  }
  return table;
}

FitResult fit_slope(const SensitivityTable& table) {
  std::vector<double> x, y;
  x.reserve(table.records.size());
  y.reserve(table.records.size());
  for (const auto& rec : table.records) {
    if (rec.s > 0.0 && rec.p > 0.0) {
      x.push_back(std::log(rec.p));
      y.push_back(std::log(rec.s));
    }
  }
  if (x.size() < 3) throw std::invalid_argument("fit_slope: degenerate fit");
  return linfit_clipped(x, y, 0.01, 0.99);
}

EffectiveLrProfile effective_lr_profile(const SensitivityTable& table) {
  std::map<std::size_t, std::vector<double>> s_by_lag, p_by_lag;
  for (const auto& rec : table.records) {
    s_by_lag[rec.lag].push_back(rec.s);
    p_by_lag[rec.lag].push_back(rec.p);
  }
  if (!s_by_lag.count(1)) {
    throw std::invalid_argument("effective_lr_profile: no unit-lag records");
  }

  EffectiveLrProfile prof;
  try {
    prof.slope = fit_slope(table);
  } catch (const std::invalid_argument&) {
    prof.slope.reset();  // e.g. plain model, P identically 1
  }

  const double s1 = median(s_by_lag.at(1));
  const double p1 = median(p_by_lag.at(1));
  for (const auto& [lag, svals] : s_by_lag) {
    double ms = median(svals);
    double mp = median(p_by_lag.at(lag));
    prof.lags.push_back(lag);
    prof.mu_eff.push_back(s1 > 0.0 ? ms / s1 : std::numeric_limits<double>::quiet_NaN());
    double pred0 = p1 > 0.0 ? mp / p1 : std::numeric_limits<double>::quiet_NaN();
    prof.mu_pred0.push_back(pred0);
    prof.mu_predfit.push_back(prof.slope ? std::pow(pred0, prof.slope->slope)
                                         : std::numeric_limits<double>::quiet_NaN());
  }
  return prof;
}

SpectrumSummary spectrum_metrics(std::span<const double> sigma, std::size_t r) {
  if (sigma.empty()) throw std::invalid_argument("spectrum_metrics: empty spectrum");
  if (r < 1 || r > sigma.size()) {
    throw std::invalid_argument("spectrum_metrics: r outside [1, len(sigma)]");
  }
  for (std::size_t i = 0; i + 1 < sigma.size(); ++i) {
    if (sigma[i] < sigma[i + 1]) {
      throw std::invalid_argument("spectrum_metrics: sigma not descending");
    }
  }
  SpectrumSummary out;
  out.sigma.assign(sigma.begin(), sigma.end());
  out.r = r;
  double total = 0.0, top = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    double sq = sigma[i] * sigma[i];
    total += sq;
    if (i < r) top += sq;
  }
  if (sigma[r - 1] > 0.0) {
    out.ai_r = sigma[0] / sigma[r - 1];
  } else {
    // rank-deficient at r
    out.ai_r = std::numeric_limits<double>::infinity();
    out.rank_deficient = true;
  }
  out.ce_r = total > 0.0 ? top / total : 1.0;
  return out;
}

std::vector<LagAnisotropy> jacobian_anisotropy_vs_lag(
    const ModelKind& kind, const Params& p, const Batch& probe,
    std::span<const std::size_t> lags, std::size_t r,
    const PairSampler& sampler) {
  probe.validate();
  const std::size_t horizon = probe.horizon();
  if (r < 1 || r > p.n_rec()) {
    throw std::invalid_argument("jacobian_anisotropy_vs_lag: r outside [1, n_rec]");
  }

  // Anisotropy needs full spectra of explicit products, which costs far more
  // per pair than the power-method sensitivity; the sampler cap therefore
  // applies to (sequence, t, k) triples pooled across the probe.
  std::vector<std::vector<JacobianDecomposition>> decomps(probe.size());
  for (std::size_t seq = 0; seq < probe.size(); ++seq) {
    Trajectory traj = forward(kind, p, probe.inputs[seq]);
    decomps[seq].reserve(horizon);
    for (std::size_t j = 1; j <= horizon; ++j) {
      decomps[seq].push_back(step_jacobian(kind, p, traj, j));
    }
  }

  std::vector<LagAnisotropy> out;
  for (std::size_t lag : lags) {
    if (lag < 1 || lag >= horizon) {
      throw std::invalid_argument("jacobian_anisotropy_vs_lag: lag outside [1, T-1]");
    }
    std::vector<std::pair<std::size_t, std::size_t>> triples;  // (seq, k)
    for (std::size_t seq = 0; seq < probe.size(); ++seq) {
      for (std::size_t k = 1; k + lag <= horizon; ++k) triples.emplace_back(seq, k);
    }
    if (triples.size() > sampler.max_pairs) {
      CounterRng rng(sampler.seed, lag + 1000);
      for (std::size_t i = 0; i < sampler.max_pairs; ++i) {
        std::size_t j = i + rng.next_below(triples.size() - i);
        std::swap(triples[i], triples[j]);
      }
      triples.resize(sampler.max_pairs);
      std::sort(triples.begin(), triples.end());
    }

    std::vector<double> ais, ces;
    for (auto [seq, k] : triples) {
      JacobianProduct prod(decomps[seq], k, k + lag);
      auto sigma = svd_values(prod.to_matrix());
      auto summary = spectrum_metrics(sigma, r);
      ais.push_back(summary.ai_r);
      ces.push_back(summary.ce_r);
    }
    LagAnisotropy la;
    la.lag = lag;
    la.median_ai = median(ais);
    la.median_ce = median(ces);
    la.r = r;
    la.samples = triples.size();
    out.push_back(la);
  }
  return out;
}

UpdateAnisotropy update_anisotropy_from_matrix(Matrix g, std::size_t r,
                                               std::uint64_t jitter_seed) {
  const std::size_t m = g.rows();
  const std::size_t p = g.cols();
  if (m == 0 || p == 0) throw std::invalid_argument("update_anisotropy: empty matrix");

  UpdateAnisotropy out;
  out.m = m;
  out.p = p;

  // (2) l2-normalize rows; drop zero rows
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < m; ++i) {
    double n = norm2(g.row(i));
    if (n > 0.0) {
      for (double& v : g.row(i)) v /= n;
      keep.push_back(i);
    }
  }
  out.dropped_rows = m - keep.size();
  if (keep.empty()) {
    throw std::invalid_argument("update_anisotropy: all gradient rows are zero");
  }
  Matrix rows(keep.size(), p);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    auto src = g.row(keep[i]);
    std::copy(src.begin(), src.end(), rows.row(i).begin());
  }
  const double pre_center_fro = frobenius_norm(rows);

  // (3) mean-center columns
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) mean += rows(i, j);
    mean /= static_cast<double>(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) rows(i, j) -= mean;
  }

  // (4) drop near-constant columns (std below 1e-12 of the largest std)
  std::vector<double> col_std(p, 0.0);
  double max_std = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) acc += rows(i, j) * rows(i, j);
    col_std[j] = std::sqrt(acc / static_cast<double>(rows.rows()));
    max_std = std::max(max_std, col_std[j]);
  }
  const double col_tol = 1e-12 * max_std;
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < p; ++j) {
    if (col_std[j] >= col_tol && col_std[j] > 0.0) cols.push_back(j);
  }
  out.dropped_cols = p - cols.size();
  if (cols.empty()) {
    // centering annihilated everything (e.g. identical rows); keep all
    // columns and let the jitter floor provide a flat spectrum
    for (std::size_t j = 0; j < p; ++j) cols.push_back(j);
    out.dropped_cols = 0;
  }
  Matrix centered(rows.rows(), cols.size());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) centered(i, j) = rows(i, cols[j]);
  }

  const double fro = frobenius_norm(centered);
  out.degenerate = fro < 1e-12 * pre_center_fro;
  if (out.degenerate) {
    // centering annihilated the matrix up to roundoff; the leftover rounding
    // residue is low-rank noise with no meaning, so clear it and let the
    // jitter floor provide a flat spectrum
    for (double& v : centered.data()) v = 0.0;
  }

  // (5) jitter for numerical stability; absolute floor for the degenerate case
  const double kappa = out.degenerate ? 1e-10 : 1e-10 * fro;
  CounterRng rng(jitter_seed);
  for (double& v : centered.data()) v += rng.next_uniform(-kappa, kappa);

  // (6)+(7)
  auto sigma = svd_values(centered);
  std::size_t reff = std::min(r, sigma.size());
  out.spectrum = spectrum_metrics(sigma, reff);
  return out;
}

UpdateAnisotropy update_anisotropy(const ModelKind& kind, const Params& p,
                                   const Batch& probe, std::size_t r,
                                   std::uint64_t jitter_seed) {
  if (probe.size() < r) {
    throw std::invalid_argument("update_anisotropy: need at least r probe sequences");
  }
  Matrix g = per_sample_grad_matrix(kind, p, probe);
  return update_anisotropy_from_matrix(std::move(g), r, jitter_seed);
}

}  // namespace gatelab
