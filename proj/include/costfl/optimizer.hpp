#pragma once

#include <string>
#include <vector>

#include "costfl/core_model.hpp"

namespace costfl {

/// The P3 instance seen by the optimizer: population-mean unit costs, N,
/// gamma, and rho = A0/B0. Objective values are relative (scaled by eps/B0).
struct P3Problem {
  UnitMeans means;
  int n = 1;
  double gamma = 0.0;
  double rho = 1.0;

  static P3Problem from(const Population& pop, const CostWeights& weights, double rho);

  double objective(double k, double e) const;

  /// Stationary K for fixed E (not projected). +inf when gamma == 0.
  double stationary_k(double e) const;

  /// Unique positive stationary E for fixed K (not projected). Returns 0 when
  /// the per-round cost has no communication part (objective increasing in E).
  double stationary_e(double k) const;
};

double closed_form_k(double e, const Population& pop, const CostWeights& weights, double rho, int n);
double solve_cubic_e(double k, const Population& pop, const CostWeights& weights, double rho, int n);

/// Real roots of a x^3 + b x^2 + c x + d = 0 (a != 0) by Cardano's method,
/// trigonometric form when all three roots are real. Ascending order.
std::vector<double> cubic_real_roots(double a, double b, double c, double d);

struct AcsTrace {
  std::vector<ControlPoint> iterates;  // z_0 (the start) through the last update
  bool converged = false;
  ControlPoint final_integer_point;
  double objective_at_final = 0.0;
  const ControlPoint& final_continuous() const { return iterates.back(); }
};

struct AcsOptions {
  double eps0 = 1e-6;
  int max_iters = 100;
};

/// Default feasible start (N, 10).
ControlPoint default_acs_start(int n);

AcsTrace acs_optimize(const P3Problem& problem, const ControlPoint& init, const AcsOptions& opts = {});
AcsTrace acs_optimize(const Population& pop, const CostWeights& weights, double rho, int n,
                      const ControlPoint& init, double eps0 = 1e-6, int max_iters = 100);

/// Rounds a continuous point to the best feasible floor/ceil combination.
ControlPoint round_to_integer(const P3Problem& problem, const ControlPoint& z);

struct IntRange {
  int lo = 1;
  int hi = 1;
  int size() const { return hi - lo + 1; }
};

ControlPoint grid_search_p3(const Population& pop, const CostWeights& weights, double rho, int n,
                            IntRange k_range, IntRange e_range);

struct PropertyCheck {
  std::string name;
  bool passed = false;
  std::string witness;
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;
  bool all_passed() const;
};

/// Grid assertions for biconvexity, the K monotonicity theorems for
/// gamma in {0, 1}, unimodality in E, E* monotonicity in the comm/comp ratios
/// and the (K*, E*) monotonicity in gamma under proportional power.
PropertyReport property_check_suite(const Population& pop, double rho, int n);

}  // namespace costfl
