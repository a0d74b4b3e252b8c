#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "costfl/errors.hpp"
#include "costfl/harness.hpp"

namespace h = costfl::harness;

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware (K, E) selection for federated averaging"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;
  std::optional<std::string> output;
  std::optional<int> workers;
  bool json = false;

  const std::pair<const char*, const char*> commands[] = {
      {"estimate", "Probe (K, E) pairs and estimate A0/B0"},
      {"optimize", "Run alternate convex search for (K*, E*)"},
      {"simulate", "One FedAvg run at a point or at (K*, E*)"},
      {"sweep", "Grid of realized costs and the empirical optimum"},
      {"tradeoff", "Full pipeline for every gamma in the config"},
  };
  for (const auto& [name, desc] : commands) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "Experiment config (JSON); defaults apply when omitted");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--gamma", gamma, "Cost weight override in [0, 1]");
    sub->add_option("--output", output, "Output directory override");
    sub->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);
    sub->add_flag("--json", json, "Also write JSON mirrors of the outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? h::kExitOk : h::kExitSchema;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  h::Command cmd = h::Command::kEstimate;
  if (name == "optimize") cmd = h::Command::kOptimize;
  if (name == "simulate") cmd = h::Command::kSimulate;
  if (name == "sweep") cmd = h::Command::kSweep;
  if (name == "tradeoff") cmd = h::Command::kTradeoff;

  h::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = h::load_config(config_path);
  } catch (const costfl::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return h::kExitSchema;
  }
  if (seed) cfg.seed = *seed;
  if (gamma) {
    cfg.gamma = *gamma;
    cfg.gammas = {*gamma};
  }
  if (output) cfg.output_dir = *output;
  if (workers) cfg.workers = *workers;
#ifdef _OPENMP
  if (cfg.workers > 1) omp_set_max_active_levels(1);
#endif

  return h::run_command(cmd, cfg, h::CommandOptions{json}, std::cout, std::cerr);
}
