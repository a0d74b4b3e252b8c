#pragma once

#include <cstdint>
#include <vector>

#include "costfl/core_model.hpp"

namespace costfl {

struct CostBreakdown {
  double expected_time = 0.0;    // seconds
  double expected_energy = 0.0;  // joules
  double weighted_total = 0.0;
};

/// Partial-participation penalty (N - K) / (K (N - 1)); zero when N == 1.
double participation_penalty(double k, int n);

/// K (e_p E + e_m) R with population-mean unit energies.
double expected_energy(const Population& pop, int k, int e, int r);

/// Probability that the i-th fastest of n clients (1-based) is the slowest
/// of a uniform k-subset: C(i-1, k-1) / C(n, k). Entry i-1 of the result.
std::vector<double> straggler_weights(int n, int k);

/// Expected slowest-client round time for uniform sampling of k clients
/// without replacement, per-client time t_p E + t_m.
double expected_round_time_exact(const Population& pop, int k, double e);

/// Monte Carlo estimate of expected_round_time_exact over `trials` sampled sets.
double expected_round_time_mc(const Population& pop, int k, double e, std::int64_t trials,
                              const RngSeed& seed);

/// (t_p E + t_m) R with population-mean unit times.
double approx_expected_time(const Population& pop, double e, double r);

struct P3Value {
  double value = 0.0;
  /// True when only A0/B0 was known: value is the objective divided by B0/epsilon.
  bool relative = false;
};

/// Cost-to-precision objective after eliminating R.
P3Value p3_objective(const Population& pop, const CostWeights& weights, const BoundParams& bound,
                     const ControlPoint& point);

/// p3_objective scaled by epsilon/B0. Only rho enters; used by the optimizer.
double p3_relative(const UnitMeans& m, int n, double gamma, double rho, double k, double e);

CostBreakdown exact_expected_total_cost(const Population& pop, const CostWeights& weights, int k,
                                        int e, int r);

/// Rounds making the bound equal to epsilon. Throws UnidentifiedError when
/// only the ratio is known.
double r_required(const BoundParams& bound, double k, double e, int n);

}  // namespace costfl
