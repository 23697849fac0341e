// Copyright 2026 The memsgd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "memsgd/cli/checks.hpp"
#include "memsgd/cli/commands.hpp"
#include "memsgd/cli/config.hpp"

namespace memsgd::cli {

inline RunConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Flags shared by the config-driven subcommands. Shortcut flags are applied
/// after --set, so they win.
struct ConfigFlags {
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed, steps;
  std::optional<std::string> csv, json, label;

  void attach(CLI::App* cmd) {
    cmd->add_option("--set", sets, "Override a key: section.key=value (repeatable)");
    cmd->add_option("--seed", seed, "Same as --set run.seed=...");
    cmd->add_option("--steps", steps, "Same as --set run.steps=...");
    cmd->add_option("--csv", csv, "Same as --set output.csv=...");
    cmd->add_option("--json", json, "Same as --set output.json=...");
    cmd->add_option("--label", label, "Same as --set run.label=...");
  }

  void apply(RunConfig& c) const {
    for (const auto& s : sets) apply_override(c, s);
    if (seed) c.run.seed = *seed;
    if (steps) c.run.steps = *steps;
    if (csv) c.output.csv = *csv;
    if (json) c.output.json = *json;
    if (label) c.run.label = *label;
  }

  RunConfig load(const std::string& path) const {
    RunConfig c = path.empty() ? RunConfig{} : read_config_file(path);
    apply(c);
    return c;
  }
};

/// Entry point of the `memsgd` tool. Returns 0 on success, 1 on usage or
/// configuration errors, 2 when a check suite fails.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Sparsified SGD with error feedback"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Train once and write checkpoint CSV (and a JSON summary)");
  run->add_option("config", config_path, "Config file; defaults are used when omitted");
  flags.attach(run);

  std::vector<std::string> compare_paths;
  auto* compare = app.add_subcommand("compare", "Run several configs on one problem; merged CSV");
  compare->add_option("configs", compare_paths, "Two or more config files")->required();
  flags.attach(compare);

  std::optional<std::string> grid;
  std::optional<std::uint64_t> subsample;
  auto* tune = app.add_subcommand("tune-gamma0", "Grid search for gamma0 in gamma0/(1 + gamma0 lambda t)");
  tune->add_option("config", config_path, "Config file");
  tune->add_option("--grid", grid, "Comma-separated gamma0 values");
  tune->add_option("--subsample", subsample, "Rows to tune on (0: all)");
  flags.attach(tune);

  bool check_json = false;
  std::string tie_hook = "lowest";
  auto* check = app.add_subcommand("check", "Run the self-check suites");
  check->add_flag("--json", check_json, "Machine-readable report");
  check->add_option("--tie-hook", tie_hook, "Tie rule used by top_k (testing hook)")
      ->check(CLI::IsMember({"lowest", "highest"}));

  std::string dataset_path;
  bool zero_one = false, reference = false;
  auto* info = app.add_subcommand("dataset-info", "Statistics of a LIBSVM file");
  info->add_option("path", dataset_path, "LIBSVM file");
  info->add_flag("--zero-one", zero_one, "Labels are 0/1 (0 maps to -1)");
  std::optional<std::size_t> dataset_dim;
  info->add_option("--dim", dataset_dim, "Feature dimension (default: largest index)");
  info->add_flag("--reference", reference, "Also list the reference dataset sizes");

  std::optional<std::uint64_t> probe_k, probe_batch, probe_trials;
  auto* probe = app.add_subcommand("variance-probe", "Variance of the rescaled rand_k gradient estimator");
  probe->add_option("config", config_path, "Config file");
  probe->add_option("--k", probe_k, "Kept coordinates");
  probe->add_option("--batch", probe_batch, "Mini-batch size");
  probe->add_option("--trials", probe_trials, "Monte Carlo trials");
  flags.attach(probe);

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");
  show->add_option("config", config_path, "Config file");
  flags.attach(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "memsgd: " << e.what() << '\n';
    if (e.get_exit_code() != 0) err << "run 'memsgd --help' for usage\n";
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(flags.load(config_path), out);
    if (*compare) {
      std::vector<RunConfig> configs;
      for (const auto& p : compare_paths) configs.push_back(flags.load(p));
      return cmd_compare(configs, out);
    }
    if (*tune) {
      RunConfig c = flags.load(config_path);
      if (grid) set_value(c, "tune", "grid", *grid);
      if (subsample) c.tune.subsample = *subsample;
      return cmd_tune_gamma0(c, out, err);
    }
    if (*check) {
      CheckOptions o;
      o.tie = tie_hook == "highest" ? TieBreak::highest_index : TieBreak::lowest_index;
      return cmd_check(o, check_json, out);
    }
    if (*info) {
      if (dataset_path.empty() && !reference) throw ConfigError("dataset-info needs a path or --reference");
      return cmd_dataset_info(dataset_path, zero_one ? LabelMode::zero_one : LabelMode::strict_pm1,
                              dataset_dim, reference, out);
    }
    if (*probe) {
      RunConfig c = flags.load(config_path);
      if (probe_k) c.probe.k = *probe_k;
      if (probe_batch) c.probe.batch = *probe_batch;
      if (probe_trials) c.probe.trials = *probe_trials;
      return cmd_variance_probe(c, out);
    }
    if (*show) {
      const RunConfig c = flags.load(config_path);
      validate(c);
      out << serialize(c);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "memsgd: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace memsgd::cli
