#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "costfl/bound_estimator.hpp"
#include "costfl/core_model.hpp"
#include "costfl/fl_sim.hpp"
#include "costfl/optimizer.hpp"

namespace costfl::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitUnreachable = 3;
inline constexpr int kExitNonConvergence = 4;

enum class Command { kEstimate, kOptimize, kSimulate, kSweep, kTradeoff };

struct PopulationSpec {
  int n = 100;
  DeviceProfile means{0.1, 2.0, 1e-3, 2e-2};
  double rel_std = 1.0 / 3.0;
  std::vector<DeviceProfile> profiles;  // explicit list overrides the draw
};

struct DatasetSpec {
  enum class Kind { kSynthetic, kLabelPartition, kFile };
  Kind kind = Kind::kSynthetic;
  double alpha = 1.0;
  double beta = 1.0;
  CountDistribution counts;
  int labels_per_client = 2;
  int samples_per_client = 300;
  int pool_size = 60000;
  std::string path;
};

/// Round counts generated from the convergence bound instead of training
/// (R = d + (A0 + B0 (1 + phi) E^2) / (E (F - F*))); a test mode.
struct PlantedBound {
  double a0 = 1.0;
  double b0 = 1.0;
  double d = 0.0;
  double f_star = 0.0;
};

struct EstimationSpec {
  std::vector<std::pair<int, int>> probes{{10, 10}, {20, 20}, {30, 30}, {40, 40}, {50, 50}};
  double f_a = 1.5;
  double f_b = 1.3;
  int max_rounds = 2000;
  std::optional<double> rho;  // skips estimation when set
  std::optional<PlantedBound> planted;
};

struct OptimizerSpec {
  double eps0 = 1e-6;
  int max_iters = 100;
  std::optional<std::pair<double, double>> init;  // default (N, 10)
  std::optional<IntRange> k_range;                // default [1, N]
  IntRange e_range{1, 100};
};

struct SweepSpec {
  std::vector<int> k_values{1, 2, 5, 10, 20, 50, 100};
  std::vector<int> e_values{5, 10, 20, 30, 40, 60};
  int seeds_per_cell = 20;
};

struct ExperimentConfig {
  PopulationSpec population;
  DatasetSpec dataset;
  TrainingConfig training;
  double gamma = 0.5;
  std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  EstimationSpec estimation;
  OptimizerSpec optimizer;
  SweepSpec sweep;
  std::optional<std::pair<int, int>> point;  // simulate target; default (K*, E*)
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int workers = 1;

  /// Throws SchemaError on any inconsistency relevant to `cmd`.
  void validate(Command cmd) const;
  IntRange k_range() const;
};

/// Parses and checks a config document. Unknown keys are rejected. Missing
/// keys keep their defaults.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Dataset and cost population built from the config seeds.
FedSimulator build_simulator(const ExperimentConfig& cfg);
/// Population only (cheap when the dataset is synthetic with known counts).
Population build_population_only(const ExperimentConfig& cfg);

RngSeed run_seed(const ExperimentConfig& cfg, int replicate);

struct EstimateResult {
  EstimationReport report;
  std::vector<EstimationSample> samples;          // trained probes
  std::vector<RoundObservation> observations;     // planted probes
};

/// Trained probes run in parallel up to cfg.workers.
EstimateResult run_estimate(const ExperimentConfig& cfg, const FedSimulator* sim);

struct OptimizeResult {
  P3Problem problem;
  AcsTrace trace;
};

OptimizeResult run_optimize(const ExperimentConfig& cfg, const Population& pop, double gamma,
                            double rho);

/// Mean outcome of seeds_per_cell runs at one (K, E). Means are over the
/// completed runs.
struct CellStats {
  int k = 0;
  int e = 0;
  int runs = 0;
  int completed = 0;
  double mean_rounds = 0.0;
  double mean_time = 0.0;
  double mean_energy = 0.0;

  bool complete() const { return runs > 0 && completed == runs; }
  double mean_cost(double gamma) const { return (1.0 - gamma) * mean_time + gamma * mean_energy; }
};

/// Runs `replicates` seeds per cell with run_seed(cfg, s). The output order
/// follows `cells` regardless of the worker count.
std::vector<CellStats> evaluate_cells(const ExperimentConfig& cfg, const FedSimulator& sim,
                                      const std::vector<std::pair<int, int>>& cells, int replicates);

/// Index of the cheapest complete cell; first wins on ties.
std::optional<std::size_t> empirical_argmin(const std::vector<CellStats>& cells, double gamma);

struct TradeoffRow {
  double gamma = 0.0;
  std::optional<ControlPoint> point;
  bool converged = false;
  std::optional<CellStats> stats;
  std::string error;
};

std::vector<TradeoffRow> run_tradeoff(const ExperimentConfig& cfg, const FedSimulator& sim,
                                      double rho);

struct CommandOptions {
  bool json = false;
};

/// Each command writes its artifacts under cfg.output_dir, prints a summary
/// to `out` and returns a process exit code.
int cmd_estimate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_optimize(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_tradeoff(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out);

int run_command(Command cmd, const ExperimentConfig& cfg, const CommandOptions& opts,
                std::ostream& out, std::ostream& err);

}  // namespace costfl::harness
