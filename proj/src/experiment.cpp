// SPDX-License-Identifier: Apache-2.0

#include "gatelab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gatelab/expansion.hpp"
#include "gatelab/rng.hpp"

namespace gatelab {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return CounterRng::mix64(CounterRng::mix64(base) ^
                           CounterRng::mix64(index ^ 0xC2B2AE3D27D4EB4Full));
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  static const std::set<std::string> known = {
      "model", "task", "alpha", "activation", "n_rec", "n_in", "n_out",
      "seq_len", "ar2_a", "ar2_b", "delay_d1", "delay_d2", "ma_window",
      "optimizer", "lr", "beta1", "beta2", "adam_eps", "batch_size",
      "iterations", "checkpoint_every", "probe_m", "probe_batch", "lags",
      "rank_r", "expansion_window", "seed_init", "seed_data", "seed_probe",
      "out_dir"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);
  }
  if (!j.contains("model") || !j.contains("task")) {
    throw ConfigError("config requires \"model\" and \"task\"");
  }

  ExperimentConfig c;
  try {
    c.model = j.at("model").get<std::string>();
    c.task = j.at("task").get<std::string>();
    c.alpha = j.value("alpha", c.alpha);
    c.activation = j.value("activation", c.activation);
    c.n_rec = j.value("n_rec", c.n_rec);
    if (j.contains("n_in")) c.n_in = j.at("n_in").get<std::size_t>();
    c.n_out = j.value("n_out", c.n_out);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.ar2_a = j.value("ar2_a", c.ar2_a);
    c.ar2_b = j.value("ar2_b", c.ar2_b);
    c.delay_d1 = j.value("delay_d1", c.delay_d1);
    c.delay_d2 = j.value("delay_d2", c.delay_d2);
    c.ma_window = j.value("ma_window", c.ma_window);
    c.optimizer = j.value("optimizer", c.optimizer);
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.iterations = j.value("iterations", c.iterations);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.probe_m = j.value("probe_m", c.probe_m);
    c.probe_batch = j.value("probe_batch", c.probe_batch);
    if (j.contains("lags")) c.lags = j.at("lags").get<std::vector<std::size_t>>();
    c.rank_r = j.value("rank_r", c.rank_r);
    // the default window clamps to short sequences; explicit values must fit
    c.expansion_window = j.contains("expansion_window")
                             ? j.at("expansion_window").get<std::size_t>()
                             : std::min(c.expansion_window, c.seq_len);
    c.seed_init = j.value("seed_init", c.seed_init);
    c.seed_data = j.value("seed_data", c.seed_data);
    c.seed_probe = j.value("seed_probe", c.seed_probe);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["model"] = model;
  j["task"] = task;
  j["alpha"] = alpha;
  j["activation"] = activation;
  j["n_rec"] = n_rec;
  j["n_in"] = input_dim();
  j["n_out"] = n_out;
  j["seq_len"] = seq_len;
  j["ar2_a"] = ar2_a;
  j["ar2_b"] = ar2_b;
  j["delay_d1"] = delay_d1;
  j["delay_d2"] = delay_d2;
  j["ma_window"] = ma_window;
  j["optimizer"] = optimizer;
  j["lr"] = learning_rate();
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["batch_size"] = batch_size;
  j["iterations"] = iterations;
  j["checkpoint_every"] = checkpoint_every;
  j["probe_m"] = probe_m;
  j["probe_batch"] = probe_batch;
  j["lags"] = lags;
  j["rank_r"] = rank_r;
  j["expansion_window"] = expansion_window;
  j["seed_init"] = seed_init;
  j["seed_data"] = seed_data;
  j["seed_probe"] = seed_probe;
  j["out_dir"] = out_dir;
  return j;
}

ModelKind ExperimentConfig::model_kind() const {
  return ModelKind::from_name(model, alpha);
}

Activation ExperimentConfig::activation_enum() const {
  if (activation == "tanh") return Activation::kTanh;
  if (activation == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + activation);
}

TaskSpec ExperimentConfig::task_spec(std::uint64_t seed) const {
  TaskSpec spec;
  spec.kind = task_kind();
  spec.seq_len = seq_len;
  spec.seed = seed;
  spec.ar2_a = ar2_a;
  spec.ar2_b = ar2_b;
  spec.delay_d1 = delay_d1;
  spec.delay_d2 = delay_d2;
  spec.ma_window = ma_window;
  return spec;
}

std::size_t ExperimentConfig::input_dim() const {
  return n_in ? *n_in : task_spec(0).input_dim();
}

double ExperimentConfig::learning_rate() const {
  if (lr) return *lr;
  return optimizer == "adam" ? 0.001 : 0.01;
}

void ExperimentConfig::validate() const {
  try {
    (void)model_kind();
    (void)task_kind();
    (void)activation_enum();
    task_spec(0).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (optimizer != "sgd" && optimizer != "adam") {
    throw ConfigError("optimizer must be sgd or adam");
  }
  if (n_rec < 1 || n_out < 1 || batch_size < 1 || checkpoint_every < 1 ||
      probe_m < 1 || probe_batch < 1 || rank_r < 1 || expansion_window < 1) {
    throw ConfigError("counts must be >= 1");
  }
  if (rank_r > n_rec) throw ConfigError("rank_r must be <= n_rec");
  if (learning_rate() < 0.0) throw ConfigError("lr must be >= 0");
  if (expansion_window > seq_len) throw ConfigError("expansion_window must be <= seq_len");
  for (std::size_t lag : lags) {
    if (lag < 1 || lag >= seq_len) throw ConfigError("lags must lie in [1, seq_len-1]");
  }
  if (lags.empty() || lags[0] != 1) {
    throw ConfigError("lag set must start at 1 (profiles are anchored at unit lag)");
  }
}

ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

namespace {

fs::path checkpoint_path(const fs::path& dir, std::size_t iter) {
  return dir / ("checkpoint_" + std::to_string(iter) + ".json");
}

Checkpoint load_checkpoint(const fs::path& dir, std::size_t iter) {
  fs::path path = checkpoint_path(dir, iter);
  if (!fs::exists(path)) throw ConfigError("missing checkpoint: " + path.string());
  return checkpoint_from_json(json::parse(read_file(path)));
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ck) {
  write_file_atomic(checkpoint_path(dir, ck.iteration),
                    checkpoint_to_json(ck).dump());
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  bool first = true;
  for (const auto& cell : cells) {
    if (!first) row += ',';
    row += cell;
    first = false;
  }
  row += '\n';
  return row;
}

std::string num(double v) { return format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace

std::vector<std::size_t> list_checkpoints(const fs::path& dir) {
  std::vector<std::size_t> iters;
  if (!fs::is_directory(dir)) return iters;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("checkpoint_", 0) == 0 && name.size() > 16 &&
        name.substr(name.size() - 5) == ".json") {
      std::string digits = name.substr(11, name.size() - 16);
      if (!digits.empty() &&
          digits.find_first_not_of("0123456789") == std::string::npos) {
        iters.push_back(std::stoul(digits));
      }
    }
  }
  std::sort(iters.begin(), iters.end());
  return iters;
}

TrainOutcome run_train(const ExperimentConfig& config, bool resume) {
  config.validate();
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", config.to_json().dump(2) + "\n");

  const ModelKind kind = config.model_kind();
  Params params;
  AdamState adam;
  const bool use_adam = config.optimizer == "adam";
  std::size_t start_iter = 0;
  std::string loss_log = "iter,train_loss\n";

  if (resume) {
    auto existing = list_checkpoints(dir);
    if (!existing.empty() && existing.back() > 0) {
      start_iter = existing.back();
      Checkpoint ck = load_checkpoint(dir, start_iter);
      params = ck.params;
      if (use_adam) {
        adam = ck.has_adam ? ck.adam : AdamState::zeros(params.flat_dim());
      }
      if (fs::exists(dir / "loss.csv")) loss_log = read_file(dir / "loss.csv");
    }
  }
  if (start_iter == 0) {
    params = init_params(kind, config.n_rec, config.input_dim(), config.n_out,
                         config.seed_init, config.activation_enum());
    if (use_adam) adam = AdamState::zeros(params.flat_dim());
  }

  TrainOutcome outcome;
  const double mu = config.learning_rate();
  for (std::size_t it = start_iter;; ++it) {
    if (it % config.checkpoint_every == 0 || it == config.iterations) {
      Checkpoint ck;
      ck.iteration = it;
      ck.kind = kind;
      ck.params = params;
      ck.has_adam = use_adam;
      if (use_adam) ck.adam = adam;
      save_checkpoint(dir, ck);
      outcome.checkpoints.push_back(it);
    }
    if (it == config.iterations) break;

    TaskSpec spec = config.task_spec(derive_seed(config.seed_data, it));
    Batch batch = generate_batch(spec, config.batch_size);
    double loss = 0.0;
    try {
      GradientSet grads = bptt_grad(kind, params, batch, &loss);
      if (!std::isfinite(loss)) throw DivergenceError(it, "non-finite loss");
      if (use_adam) {
        auto [next, state] = adam_step(params, grads, std::move(adam), mu,
                                       config.beta1, config.beta2, config.adam_eps);
        params = std::move(next);
        adam = std::move(state);
      } else {
        params = sgd_step(params, grads, mu);
      }
    } catch (const DivergenceError&) {
      // persist the last finite parameters before reporting failure
      Checkpoint ck;
      ck.iteration = it;
      ck.kind = kind;
      ck.params = params;
      ck.has_adam = use_adam;
      if (use_adam) ck.adam = adam;
      save_checkpoint(dir, ck);
      outcome.diverged = true;
      outcome.diverged_at = it;
      break;
    }
    loss_log += num(it) + "," + num(loss) + "\n";
  }
  write_file_atomic(dir / "loss.csv", loss_log);
  return outcome;
}

void run_probe(const ExperimentConfig& config, const ProbeOptions& options) {
  config.validate();
  const fs::path dir(config.out_dir);
  const ModelKind kind = config.model_kind();

  std::vector<std::size_t> targets;
  if (options.checkpoint) {
    targets.push_back(*options.checkpoint);
  } else {
    targets = list_checkpoints(dir);
    if (targets.empty()) throw ConfigError("no checkpoints found in " + dir.string());
  }

  const Batch sens_probe =
      generate_batch(config.task_spec(derive_seed(config.seed_probe, 0)),
                     config.probe_batch);
  Batch upd_probe;
  if (options.upd_aniso) {
    upd_probe = generate_batch(config.task_spec(derive_seed(config.seed_probe, 1)),
                               config.probe_m);
  }
  PairSampler sampler{64, config.seed_probe};
  // full-spectrum medians need more samples than the sensitivity pipeline:
  // anisotropy pools (sequence, t, k) triples across the probe batch
  PairSampler aniso_sampler{256, config.seed_probe};

  std::string sens_csv = "checkpoint,t,k,lag,S,P\n";
  std::string efflr_csv = "checkpoint,lag,mu_eff,mu_pred0,mu_predfit\n";
  std::string slope_csv = "checkpoint,slope,intercept,r2,n\n";
  std::string jac_csv = "checkpoint,lag,ai_r,ce_r,r\n";
  std::string upd_csv = "checkpoint,ai_r,ce_r,r,m,p,dropped_cols,dropped_rows\n";

  for (std::size_t iter : targets) {
    Checkpoint ck = load_checkpoint(dir, iter);
    SensitivityTable table =
        sensitivity_table(kind, ck.params, sens_probe, config.lags, sampler);
    for (const auto& rec : table.records) {
      sens_csv += csv_row({num(iter), num(rec.t), num(rec.k), num(rec.lag),
                           num(rec.s), num(rec.p)});
    }
    EffectiveLrProfile prof = effective_lr_profile(table);
    for (std::size_t i = 0; i < prof.lags.size(); ++i) {
      efflr_csv += csv_row({num(iter), num(prof.lags[i]), num(prof.mu_eff[i]),
                            num(prof.mu_pred0[i]), num(prof.mu_predfit[i])});
    }
    if (prof.slope) {
      slope_csv += csv_row({num(iter), num(prof.slope->slope),
                            num(prof.slope->intercept), num(prof.slope->r_squared),
                            num(prof.slope->n_points)});
    }
    if (options.jac_aniso) {
      auto lagres = jacobian_anisotropy_vs_lag(kind, ck.params, sens_probe,
                                               config.lags, config.rank_r,
                                               aniso_sampler);
      for (const auto& la : lagres) {
        jac_csv += csv_row({num(iter), num(la.lag), num(la.median_ai),
                            num(la.median_ce), num(la.r)});
      }
    }
    if (options.upd_aniso) {
      UpdateAnisotropy ua = update_anisotropy(kind, ck.params, upd_probe,
                                              config.rank_r,
                                              derive_seed(config.seed_probe, 2));
      upd_csv += csv_row({num(iter), num(ua.spectrum.ai_r), num(ua.spectrum.ce_r),
                          num(ua.spectrum.r), num(ua.m), num(ua.p),
                          num(ua.dropped_cols), num(ua.dropped_rows)});
    }
  }

  write_file_atomic(dir / "sensitivity.csv", sens_csv);
  write_file_atomic(dir / "eff_lr.csv", efflr_csv);
  write_file_atomic(dir / "slope.csv", slope_csv);
  if (options.jac_aniso) write_file_atomic(dir / "jac_aniso.csv", jac_csv);
  if (options.upd_aniso) write_file_atomic(dir / "upd_aniso.csv", upd_csv);
}

ExpansionReport run_expansion_check(const ExperimentConfig& config,
                                    std::optional<std::size_t> checkpoint) {
  config.validate();
  const ModelKind kind = config.model_kind();
  if (!kind.gated()) {
    throw ConfigError("expansion-check needs a gated model (" + kind.name() +
                      " has no correction terms)");
  }
  const fs::path dir(config.out_dir);
  std::size_t iter;
  if (checkpoint) {
    iter = *checkpoint;
  } else {
    auto existing = list_checkpoints(dir);
    if (existing.empty()) throw ConfigError("no checkpoints found in " + dir.string());
    iter = existing.back();
  }
  Checkpoint ck = load_checkpoint(dir, iter);

  Batch probe = generate_batch(config.task_spec(derive_seed(config.seed_probe, 0)), 1);
  Trajectory traj = forward(kind, ck.params, probe.inputs[0]);
  const std::size_t t = traj.horizon();
  const std::size_t k = t - std::min(config.expansion_window, t);
  FactorSequence fs_factors = decompose_model_jacobians(kind, ck.params, traj, k, t);

  auto grid = default_eps_grid();
  ExpansionReport report = run_diagnostics(fs_factors, grid);

  std::string csv = "eps,error,c2\n";
  for (std::size_t i = 0; i < report.eps_grid.size(); ++i) {
    csv += csv_row({num(report.eps_grid[i]), num(report.errors[i]),
                    num(report.c2_values[i])});
  }
  write_file_atomic(dir / "expansion.csv", csv);

  json j;
  j["checkpoint"] = iter;
  j["window"] = {{"k", k}, {"t", t}};
  j["exact"] = report.exact;
  if (report.slope) {
    j["slope"] = report.slope->slope;
    j["intercept"] = report.slope->intercept;
    j["r2"] = report.slope->r_squared;
  } else {
    j["slope"] = nullptr;
  }
  j["ratio_median"] = report.ratio_median;
  j["ratio_max"] = report.ratio_max;
  j["ratios"] = report.ratios;
  write_file_atomic(dir / "expansion.json", j.dump(2) + "\n");
  return report;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(read_file(path));
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

json summarize_run(const fs::path& dir, std::vector<std::string>& missing) {
  json run;
  bool usable = true;
  for (const char* required : {"config.json", "loss.csv"}) {
    if (!fs::exists(dir / required)) {
      missing.push_back((dir / required).string());
      usable = false;
    }
  }
  if (!usable) return run;

  run["config"] = json::parse(read_file(dir / "config.json"));
  auto loss_rows = read_csv(dir / "loss.csv");
  if (loss_rows.size() > 1) {
    run["final_loss"] = std::stod(loss_rows.back()[1]);
    run["iterations_logged"] = loss_rows.size() - 1;
  }

  if (fs::exists(dir / "slope.csv")) {
    json slopes = json::array();
    auto rows = read_csv(dir / "slope.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      slopes.push_back({{"checkpoint", std::stoul(rows[i][0])},
                        {"slope", std::stod(rows[i][1])},
                        {"intercept", std::stod(rows[i][2])},
                        {"r2", std::stod(rows[i][3])},
                        {"n", std::stoul(rows[i][4])}});
    }
    run["slopes"] = slopes;
  }
  if (fs::exists(dir / "upd_aniso.csv")) {
    auto rows = read_csv(dir / "upd_aniso.csv");
    if (rows.size() > 1) {
      const auto& last = rows.back();
      run["update_anisotropy"] = {{"checkpoint", std::stoul(last[0])},
                                  {"ai_r", std::stod(last[1])},
                                  {"ce_r", std::stod(last[2])},
                                  {"r", std::stoul(last[3])},
                                  {"m", std::stoul(last[4])},
                                  {"p", std::stoul(last[5])}};
    }
  }
  if (fs::exists(dir / "jac_aniso.csv")) {
    auto rows = read_csv(dir / "jac_aniso.csv");
    json lags = json::array();
    std::size_t last_ck = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) last_ck = std::stoul(rows[i][0]);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (std::stoul(rows[i][0]) != last_ck) continue;
      lags.push_back({{"lag", std::stoul(rows[i][1])},
                      {"ai_r", std::stod(rows[i][2])},
                      {"ce_r", std::stod(rows[i][3])}});
    }
    run["jacobian_anisotropy"] = {{"checkpoint", last_ck}, {"per_lag", lags}};
  }
  if (fs::exists(dir / "expansion.json")) {
    run["expansion"] = json::parse(read_file(dir / "expansion.json"));
  }
  return run;
}

}  // namespace

json run_report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) {
    throw ConfigError("not a directory: " + run_dir.string());
  }
  std::vector<std::string> missing;
  json runs;
  if (fs::exists(run_dir / "config.json")) {
    json run = summarize_run(run_dir, missing);
    if (!missing.empty()) {
      std::string msg = "missing inputs:";
      for (const auto& m : missing) msg += " " + m;
      throw ConfigError(msg);
    }
    runs[run_dir.filename().empty() ? "run" : run_dir.filename().string()] = run;
  } else {
    std::vector<fs::path> subs;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
        subs.push_back(entry.path());
      }
    }
    std::sort(subs.begin(), subs.end());
    if (subs.empty()) {
      throw ConfigError("missing inputs: " + (run_dir / "config.json").string() +
                        " (no run found in " + run_dir.string() + ")");
    }
    for (const auto& sub : subs) {
      json run = summarize_run(sub, missing);
      if (missing.empty()) runs[sub.filename().string()] = run;
    }
    if (!missing.empty()) {
      std::string msg = "missing inputs:";
      for (const auto& m : missing) msg += " " + m;
      throw ConfigError(msg);
    }
  }
  json summary;
  summary["runs"] = runs;
  write_file_atomic(run_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace gatelab
