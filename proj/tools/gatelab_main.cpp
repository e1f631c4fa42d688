// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: train gated RNN variants on the synthetic sequence
// tasks, probe checkpoints for lag-dependent sensitivity and anisotropy,
// run the first-order expansion diagnostics, and aggregate reports.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gatelab/experiment.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tasks;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args.config_path, "config JSON path");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](std::uint64_t v) { args.seed = v; },
      "base seed; sets seed_init=N, seed_data=N+1, seed_probe=N+2");
  cmd->add_option("--tasks", args.tasks, "run for several tasks, each in <out>/<task>/")
      ->delimiter(',');
}

gatelab::ExperimentConfig resolve(const CommonArgs& args) {
  gatelab::ExperimentConfig config = gatelab::load_config(args.config_path);
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (args.seed) {
    config.seed_init = *args.seed;
    config.seed_data = *args.seed + 1;
    config.seed_probe = *args.seed + 2;
  }
  return config;
}

std::vector<gatelab::ExperimentConfig> expand_tasks(
    const gatelab::ExperimentConfig& base, const std::vector<std::string>& tasks) {
  if (tasks.empty()) return {base};
  std::vector<gatelab::ExperimentConfig> configs;
  for (const auto& task : tasks) {
    gatelab::ExperimentConfig c = base;
    c.task = task;
    c.out_dir = (std::filesystem::path(base.out_dir) / task).string();
    c.validate();
    configs.push_back(std::move(c));
  }
  return configs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated RNN time-scale laboratory"};
  app.require_subcommand(1);

  CommonArgs train_args, probe_args, exp_args;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "train a model, writing checkpoints and loss.csv");
  add_common(train_cmd, train_args);
  train_cmd->add_flag("--resume", resume, "continue from the newest checkpoint in out dir");

  auto* probe_cmd = app.add_subcommand(
      "probe", "measure sensitivity/effective-LR/slope CSVs for checkpoints");
  add_common(probe_cmd, probe_args);
  std::optional<std::size_t> probe_checkpoint;
  bool jac_aniso = false, upd_aniso = false;
  probe_cmd->add_option_function<std::size_t>(
      "--checkpoint", [&](std::size_t v) { probe_checkpoint = v; },
      "probe a single checkpoint iteration (default: all)");
  probe_cmd->add_flag("--jac-aniso", jac_aniso, "also emit jac_aniso.csv");
  probe_cmd->add_flag("--upd-aniso", upd_aniso, "also emit upd_aniso.csv");

  auto* exp_cmd = app.add_subcommand(
      "expansion-check", "first-order expansion diagnostics on a gated checkpoint");
  add_common(exp_cmd, exp_args);
  std::optional<std::size_t> exp_checkpoint;
  exp_cmd->add_option_function<std::size_t>(
      "--checkpoint", [&](std::size_t v) { exp_checkpoint = v; },
      "checkpoint iteration (default: newest)");

  auto* report_cmd = app.add_subcommand("report", "aggregate run CSVs into summary.json");
  std::string report_dir;
  report_cmd->add_option("--out", report_dir, "run directory to aggregate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (train_cmd->parsed()) {
      for (const auto& config : expand_tasks(resolve(train_args), train_args.tasks)) {
        gatelab::TrainOutcome outcome = gatelab::run_train(config, resume);
        if (outcome.diverged) {
          std::cerr << "training diverged at iteration " << outcome.diverged_at
                    << " (task " << config.task << "); last checkpoint persisted\n";
          return kExitDivergence;
        }
        std::cout << config.task << ": trained " << config.iterations
                  << " iterations, " << outcome.checkpoints.size()
                  << " checkpoints in " << config.out_dir << "\n";
      }
    } else if (probe_cmd->parsed()) {
      gatelab::ProbeOptions options;
      options.checkpoint = probe_checkpoint;
      options.jac_aniso = jac_aniso;
      options.upd_aniso = upd_aniso;
      for (const auto& config : expand_tasks(resolve(probe_args), probe_args.tasks)) {
        gatelab::run_probe(config, options);
        std::cout << config.task << ": probe CSVs written to " << config.out_dir << "\n";
      }
    } else if (exp_cmd->parsed()) {
      for (const auto& config : expand_tasks(resolve(exp_args), exp_args.tasks)) {
        gatelab::ExpansionReport report =
            gatelab::run_expansion_check(config, exp_checkpoint);
        std::cout << config.task << ": expansion diagnostics written to "
                  << config.out_dir;
        if (report.slope) std::cout << " (slope " << report.slope->slope << ")";
        std::cout << "\n";
      }
    } else if (report_cmd->parsed()) {
      gatelab::run_report(report_dir);
      std::cout << "summary.json written to " << report_dir << "\n";
    }
  } catch (const gatelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const gatelab::DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
