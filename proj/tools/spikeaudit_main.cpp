// Copyright 2026 The SpikeAudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "spikeaudit/experiment.hpp"

namespace {

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

struct CommonOpts {
  std::string config_path;
  int workers = default_workers();
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--workers", opts->workers, "worker threads for training")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts->seed, "override the config master seed")
      ->each([opts](const std::string&) { opts->seed_set = true; });
  cmd->add_option("--out", opts->out, "override the config output directory");
}

// CLI overrides are applied before hashing, so the printed hash names the
// settings that actually ran.
spikeaudit::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
  spikeaudit::ExperimentConfig cfg =
      spikeaudit::load_config_file(opts.config_path);
  if (opts.seed_set) cfg.master_seed = opts.seed;
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

void print_reports(const spikeaudit::ExperimentConfig& cfg,
                   const spikeaudit::ExperimentResult& r) {
  std::printf("config_hash %s  seed %llu  trained %d  reused %d\n",
              spikeaudit::hash_hex(r.hash).c_str(),
              static_cast<unsigned long long>(cfg.master_seed),
              r.stats.models_trained, r.stats.models_reused);
  std::printf("target train acc %.4f  test acc %.4f\n",
              r.game.target.train_accuracy, r.game.target.test_accuracy);
  if (r.grid) {
    std::printf("dropout grid best: p=%.3f passes=%d (auc %.4f)\n",
                r.grid->best.p, r.grid->best.passes, r.grid->best_auc);
  }
  for (const auto& [kind, report] : r.reports) {
    std::printf("%-14s auc %.4f  tpr@0.1%%fpr %.4f%s  tpr@1%%fpr %.4f%s\n",
                spikeaudit::attack_name(kind), report.auc,
                report.tpr_at_fpr_1e3,
                report.fpr_1e3_below_resolution ? "*" : " ",
                report.tpr_at_fpr_1e2,
                report.fpr_1e2_below_resolution ? "*" : " ");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spikeaudit: membership-inference privacy audit for small "
               "spiking and plain classifiers"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  CLI::App* run = app.add_subcommand(
      "run", "train the target and reference pool, score every attack");
  add_common(run, &run_opts);

  CommonOpts sweep_opts;
  std::string sweep_axis = "latency";
  CLI::App* sweep = app.add_subcommand(
      "sweep", "repeat the audit across one axis and roll up the results");
  add_common(sweep, &sweep_opts);
  sweep->add_option("--axis", sweep_axis, "latency or dropout")
      ->check(CLI::IsMember({"latency", "dropout"}));

  std::string scores_path;
  std::string report_out;
  CLI::App* report = app.add_subcommand(
      "report", "rebuild report files from a persisted scores table");
  report->add_option("scores", scores_path, "path to scores.csv")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_out,
                     "output directory (default: next to the scores file)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      spikeaudit::ExperimentConfig cfg = load_with_overrides(run_opts);
      spikeaudit::ExperimentResult r =
          spikeaudit::run_experiment(cfg, run_opts.workers);
      print_reports(cfg, r);
      std::printf("wrote %s\n", cfg.out_dir.c_str());
    } else if (sweep->parsed()) {
      spikeaudit::ExperimentConfig cfg = load_with_overrides(sweep_opts);
      auto rows = spikeaudit::run_sweep(cfg, sweep_axis, sweep_opts.workers);
      for (const auto& row : rows) {
        std::printf("%s=%s  %-14s auc %.4f\n", sweep_axis.c_str(),
                    row.axis_value.c_str(), spikeaudit::attack_name(row.attack),
                    row.auc);
      }
      std::printf("wrote %s\n", cfg.out_dir.c_str());
    } else if (report->parsed()) {
      std::string out = report_out;
      if (out.empty()) {
        out = std::filesystem::path(scores_path).parent_path().string();
        if (out.empty()) out = ".";
      }
      spikeaudit::replay_scores(scores_path, out);
      std::printf("wrote %s\n", out.c_str());
    }
  } catch (const spikeaudit::StageError& e) {
    std::fprintf(stderr, "error [stage %s]: %s\n", e.stage.c_str(), e.what());
    return 1;
  } catch (const spikeaudit::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
