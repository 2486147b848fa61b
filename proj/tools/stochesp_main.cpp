// Experiment runner for the stochastic echo state library.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>

#include "stochesp/config.hpp"
#include "stochesp/experiments.hpp"
#include "stochesp/version.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  std::string ot;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config file")
      ->required();
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "seed override");
  cmd->add_option("--ot", flags.ot, "OT method: auto|quantile|assignment|sinkhorn");
  cmd->add_option("--threads", flags.threads,
                  "worker threads (default: STOCHESP_THREADS or 1)");
}

stochesp::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  stochesp::ExperimentConfig cfg = stochesp::load_config_file(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(flags.seed);
    cfg.seeds.clear();
  }
  if (!flags.ot.empty()) cfg.ot = stochesp::parse_ot_method(flags.ot);
  if (flags.threads > 0) cfg.threads = flags.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochesp: fixed points of stochastically driven state-space "
               "systems, measured in empirical Wasserstein distance"};
  app.set_version_flag("--version", stochesp::kVersion);
  app.require_subcommand(1);

  CommonFlags run_flags, certify_flags;
  CLI::App* run = app.add_subcommand("run", "run the experiment named in a config");
  add_common(run, run_flags);
  CLI::App* certify =
      app.add_subcommand("certify", "print the certificate table for a config");
  add_common(certify, certify_flags);
  CLI::App* list = app.add_subcommand("list", "list experiments and their keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (list->parsed()) {
      std::cout << stochesp::list_experiments();
      return stochesp::kExitPass;
    }
    if (run->parsed()) {
      const auto cfg = load_with_overrides(run_flags);
      return stochesp::run_experiment(cfg);
    }
    if (certify->parsed()) {
      auto cfg = load_with_overrides(certify_flags);
      cfg.experiment = "certify";
      return stochesp::run_certify(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stochesp::kExitError;
  }
  return stochesp::kExitError;
}
