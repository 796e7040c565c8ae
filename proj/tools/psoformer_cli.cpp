/*
 * Copyright 2026 The psoformer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// psoformer command-line tool.
//
//   psoformer correlate --config exp.ini
//   psoformer baselines --config exp.ini --seed 7
//   psoformer search    --config exp.ini --out runs/a --threads 4
//   psoformer report    --config runs/a/best_config.ini --out runs/a

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "psoformer/experiment.hpp"

namespace {

using psoformer::experiment::ExperimentConfig;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file (INI)")->required();
  cmd->add_option("--seed", f.seed, "override [experiment] seed");
  cmd->add_option("--out", f.out, "override [experiment] output_dir");
  cmd->add_option("--threads", f.threads, "worker threads; 1 is the serial reference mode")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig cfg = psoformer::experiment::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.output_dir = *f.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSO-tuned Transformer experiments on tabular heart-disease data"};
  app.require_subcommand(1);
  CommonFlags flags;
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation matrix and heatmap");
  auto* baselines = app.add_subcommand("baselines", "train and evaluate tree, forest and boosting baselines");
  auto* search = app.add_subcommand("search", "PSO hyperparameter search, final Transformer and comparison");
  auto* report = app.add_subcommand("report", "evaluate a saved model and rebuild the comparison table");
  for (auto* cmd : {correlate, baselines, search, report}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve(flags);
    psoformer::experiment::RunOptions opt;
    opt.threads = flags.threads;
    if (correlate->parsed()) {
      psoformer::experiment::run_correlate(cfg, opt);
    } else if (baselines->parsed()) {
      psoformer::experiment::run_baselines(cfg, opt);
    } else if (search->parsed()) {
      psoformer::experiment::run_search(cfg, opt);
    } else {
      psoformer::experiment::run_report(cfg, opt);
    }
    std::cout << "outputs written to " << cfg.output_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "psoformer: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
