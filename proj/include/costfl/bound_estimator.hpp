#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "costfl/core_model.hpp"
#include "costfl/fl_sim.hpp"

namespace costfl {

/// One probe: rounds needed at (K, E) to first reach losses F_a then F_b.
struct EstimationSample {
  int k = 1;
  int e = 1;
  std::int64_t rounds_fa = 1;
  std::int64_t rounds_fb = 2;
  std::uint64_t seed = 0;

  /// rounds_fb > rounds_fa >= 1, k >= 1, e >= 1.
  void validate() const;
  bool operator==(const EstimationSample&) const = default;
};

/// Real-valued round observations; the estimator's core works on these so
/// bound-generated (non-integer) counts can be inverted exactly.
struct RoundObservation {
  double k = 1.0;
  double e = 1.0;
  double rounds_fa = 0.0;
  double rounds_fb = 0.0;
};

struct EstimationReport {
  double ratio_rho = 0.0;
  std::vector<double> pair_estimates;
  int discarded_pairs = 0;
  std::int64_t overhead_iterations = 0;
};

/// Runs FedAvg from w_0 = 0 until the loss first reaches f_b. Throws
/// UnreachableLossError naming the missed threshold.
EstimationSample probe_pair(const FedSimulator& sim, int k, int e, double f_a, double f_b,
                            int max_rounds, const RngSeed& seed);

/// Pair (i, j) ratio equation solved for rho; NaN when degenerate.
double pair_ratio(const RoundObservation& i, const RoundObservation& j, int n);

/// Mean of all valid pairwise rho solutions.
EstimationReport estimate_ratio(std::span<const EstimationSample> samples, int n);
EstimationReport estimate_ratio(std::span<const RoundObservation> observations, int n);

/// Estimation iterations relative to the iterations of the final run.
/// With ratio-only bounds the denominator is taken per unit B0.
double overhead_ratio(std::span<const EstimationSample> samples, const BoundParams& bound,
                      const ControlPoint& final_point, int n, double f_target_gap);

}  // namespace costfl
