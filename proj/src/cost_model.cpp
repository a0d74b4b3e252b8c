#include "costfl/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "costfl/errors.hpp"
#include "costfl/kernels.hpp"

namespace costfl {

namespace {

void check_k(int k, int n) {
  if (k < 1 || k > n) {
    throw std::invalid_argument("K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

}  // namespace

double participation_penalty(double k, int n) {
  if (n == 1) return 0.0;
  return (n - k) / (k * (n - 1.0));
}

double expected_energy(const Population& pop, int k, int e, int r) {
  check_k(k, pop.size());
  if (e < 1 || r < 1) throw std::invalid_argument("E and R must be >= 1");
  const auto& m = pop.means();
  return k * (m.e_p * e + m.e_m) * r;
}

std::vector<double> straggler_weights(int n, int k) {
  check_k(k, n);
  // Downward recurrence from w_n = C(n-1,k-1)/C(n,k) = k/n:
  //   w_{i-1} = w_i * (i - k) / (i - 1).
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  w[static_cast<std::size_t>(n - 1)] = static_cast<double>(k) / n;
  for (int i = n; i > k; --i) {
    w[static_cast<std::size_t>(i - 2)] =
        w[static_cast<std::size_t>(i - 1)] * static_cast<double>(i - k) / (i - 1);
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::logic_error("straggler weights sum to " + std::to_string(sum));
  }
  return w;
}

double expected_round_time_exact(const Population& pop, int k, double e) {
  const int n = pop.size();
  check_k(k, n);
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(n));
  for (const auto& d : pop.devices()) t.push_back(d.round_time(e));
  std::sort(t.begin(), t.end());
  const auto w = straggler_weights(n, k);
  double acc = 0.0;
  for (int i = k - 1; i < n; ++i) acc += w[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)];
  return acc;
}

double expected_round_time_mc(const Population& pop, int k, double e, std::int64_t trials,
                              const RngSeed& seed) {
  check_k(k, pop.size());
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(pop.size()));
  for (const auto& d : pop.devices()) t.push_back(d.round_time(e));
  return kernels::max_of_sample_mc(t, k, trials, seed).mean;
}

double approx_expected_time(const Population& pop, double e, double r) {
  if (!(e >= 1.0)) throw std::invalid_argument("E must be >= 1");
  if (!(r >= 0.0)) throw std::invalid_argument("R must be >= 0");
  const auto& m = pop.means();
  return (m.t_p * e + m.t_m) * r;
}

double p3_relative(const UnitMeans& m, int n, double gamma, double rho, double k, double e) {
  const double per_round = (1.0 - gamma) * (m.t_p * e + m.t_m) + gamma * k * (m.e_p * e + m.e_m);
  const double rounds = (rho + (1.0 + participation_penalty(k, n)) * e * e) / e;
  return per_round * rounds;
}

P3Value p3_objective(const Population& pop, const CostWeights& weights, const BoundParams& bound,
                     const ControlPoint& point) {
  bound.validate();
  point.validate(pop.size());
  const double rel =
      p3_relative(pop.means(), pop.size(), weights.gamma, bound.ratio_rho, point.k, point.e);
  if (bound.absolute()) return {rel * (*bound.b0) / bound.epsilon, false};
  return {rel, true};
}

CostBreakdown exact_expected_total_cost(const Population& pop, const CostWeights& weights, int k,
                                        int e, int r) {
  check_k(k, pop.size());
  if (e < 1 || r < 1) throw std::invalid_argument("E and R must be >= 1");
  CostBreakdown c;
  c.expected_time = expected_round_time_exact(pop, k, e) * r;
  c.expected_energy = expected_energy(pop, k, e, r);
  c.weighted_total = weights.blend(c.expected_time, c.expected_energy);
  return c;
}

double r_required(const BoundParams& bound, double k, double e, int n) {
  bound.validate();
  if (!bound.absolute()) {
    throw UnidentifiedError("absolute A0/B0 unidentified; only their ratio is known");
  }
  if (!(k >= 1.0 && k <= n)) throw std::invalid_argument("K outside [1, N]");
  if (!(e >= 1.0)) throw std::invalid_argument("E must be >= 1");
  return (*bound.a0 + *bound.b0 * (1.0 + participation_penalty(k, n)) * e * e) /
         (bound.epsilon * e);
}

}  // namespace costfl
