#pragma once

// Data-parallel kernels. Each OpenMP kernel has a serial twin with the same
// arithmetic order; results are bit-identical regardless of thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "costfl/fl_sim.hpp"
#include "costfl/optimizer.hpp"
#include "costfl/rng.hpp"

namespace costfl::kernels {

/// Exact integer argmin of the P3 objective; ties go to smaller K, then smaller E.
ControlPoint grid_argmin(const P3Problem& problem, IntRange k_range, IntRange e_range);
ControlPoint grid_argmin_serial(const P3Problem& problem, IntRange k_range, IntRange e_range);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
};

/// Trials are split into fixed-size blocks, each with its own derived stream.
inline constexpr std::int64_t kMcBlock = 1 << 14;

/// Mean over trials of the max of k values drawn without replacement from `times`.
McEstimate max_of_sample_mc(std::span<const double> times, int k, std::int64_t trials,
                            const RngSeed& seed);
McEstimate max_of_sample_mc_serial(std::span<const double> times, int k, std::int64_t trials,
                                   const RngSeed& seed);

/// sum_k p_k F_k(w) with p_k = n_k / n, plus the l2 term once.
double global_loss(const ModelState& m, const SyntheticDataset& data, double l2);
double global_loss_serial(const ModelState& m, const SyntheticDataset& data, double l2);

/// Local SGD for every listed client; output order follows `clients`.
std::vector<ModelState> client_updates(const ModelState& global, const SyntheticDataset& data,
                                       std::span<const int> clients, int steps,
                                       const TrainingConfig& config, int round,
                                       const RngSeed& seed);
std::vector<ModelState> client_updates_serial(const ModelState& global,
                                              const SyntheticDataset& data,
                                              std::span<const int> clients, int steps,
                                              const TrainingConfig& config, int round,
                                              const RngSeed& seed);

/// Stream used by client `id` in `round`.
RngSeed client_stream(const RngSeed& seed, int round, int id);

}  // namespace costfl::kernels
