// SPDX-License-Identifier: Apache-2.0

#ifndef GATELAB_EXPERIMENT_HPP
#define GATELAB_EXPERIMENT_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gatelab/analysis.hpp"
#include "gatelab/expansion.hpp"
#include "gatelab/serialize.hpp"
#include "gatelab/tasks.hpp"

namespace gatelab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat JSON experiment configuration. Every field has a default except
/// `model` and `task`, so {"model": "scalar_gate", "task": "adding"} is a
/// complete config. Unknown keys are rejected.
struct ExperimentConfig {
  std::string model;
  std::string task;
  double alpha = 0.5;                    // leaky update rate
  std::string activation = "tanh";
  std::size_t n_rec = 32;
  std::optional<std::size_t> n_in;       // defaults to the task's input dim
  std::size_t n_out = 1;
  std::size_t seq_len = 60;
  double ar2_a = 0.6;
  double ar2_b = -0.2;
  std::size_t delay_d1 = 3;
  std::size_t delay_d2 = 10;
  std::size_t ma_window = 8;
  std::string optimizer = "sgd";
  std::optional<double> lr;              // 0.01 for sgd, 0.001 for adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t iterations = 1200;
  std::size_t checkpoint_every = 200;
  std::size_t probe_m = 256;             // update-anisotropy probe size
  std::size_t probe_batch = 32;          // sensitivity probe size
  std::vector<std::size_t> lags = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48};
  std::size_t rank_r = 10;
  std::size_t expansion_window = 16;
  std::uint64_t seed_init = 1;
  std::uint64_t seed_data = 2;
  std::uint64_t seed_probe = 3;
  std::string out_dir = "run";

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;  // fully resolved, defaults included

  ModelKind model_kind() const;
  Activation activation_enum() const;
  TaskSpec task_spec(std::uint64_t seed) const;
  TaskKind task_kind() const { return task_from_name(task); }
  std::size_t input_dim() const;
  double learning_rate() const;
  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Derived seed for sub-purposes (iteration batches, probe batches, jitter).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct TrainOutcome {
  bool diverged = false;
  std::size_t diverged_at = 0;
  std::vector<std::size_t> checkpoints;  // iterations persisted
};

/// Train per the config, writing checkpoint_<iter>.json, loss.csv and
/// config.json under out_dir. On divergence the last finite parameters are
/// persisted and the outcome reports the failing iteration. With `resume`,
/// picks up from the newest checkpoint already in out_dir.
TrainOutcome run_train(const ExperimentConfig& config, bool resume = false);

struct ProbeOptions {
  std::optional<std::size_t> checkpoint;  // default: every checkpoint found
  bool jac_aniso = false;
  bool upd_aniso = false;
};

/// Emit sensitivity.csv, eff_lr.csv and slope.csv (plus jac_aniso.csv /
/// upd_aniso.csv on request) for the selected checkpoints, using the fixed
/// probe batches derived from seed_probe.
void run_probe(const ExperimentConfig& config, const ProbeOptions& options = {});

/// First-order expansion diagnostics on Jacobian factors from a probe
/// sequence window; writes expansion.csv and expansion.json. Rejects
/// ungated models.
ExpansionReport run_expansion_check(const ExperimentConfig& config,
                                    std::optional<std::size_t> checkpoint = {});

/// Aggregate a run directory (or its immediate sub-runs) into summary.json.
/// Missing required inputs are reported by name.
nlohmann::json run_report(const std::filesystem::path& run_dir);

/// Checkpoint iterations present in a run directory, ascending.
std::vector<std::size_t> list_checkpoints(const std::filesystem::path& dir);

}  // namespace gatelab

#endif  // GATELAB_EXPERIMENT_HPP
