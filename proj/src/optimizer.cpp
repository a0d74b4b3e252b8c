#include "costfl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "costfl/cost_model.hpp"
#include "costfl/kernels.hpp"

namespace costfl {

P3Problem P3Problem::from(const Population& pop, const CostWeights& weights, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be > 0");
  return P3Problem{pop.means(), pop.size(), weights.gamma, rho};
}

double P3Problem::objective(double k, double e) const {
  return p3_relative(means, n, gamma, rho, k, e);
}

double P3Problem::stationary_k(double e) const {
  if (n == 1) return 1.0;
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  const double nn = n;
  const double num = (1.0 - gamma) * nn * (means.t_p * e * e * e + means.t_m * e * e);
  const double den = gamma * ((nn - 2.0) * e * e + rho * (nn - 1.0)) * (means.e_p * e + means.e_m);
  return std::sqrt(num / den);
}

std::vector<double> cubic_real_roots(double a, double b, double c, double d) {
  if (a == 0.0) throw std::invalid_argument("leading coefficient is zero");
  b /= a;
  c /= a;
  d /= a;
  // x = y - b/3 gives y^3 + p y + q = 0.
  const double shift = b / 3.0;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double disc = q * q / 4.0 + p * p * p / 27.0;

  std::vector<double> roots;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    // Pick the larger-magnitude term first so the second can be formed as -p/(3u)
    // without cancellation.
    const double u = std::cbrt(-q / 2.0 + (q <= 0.0 ? s : -s));
    const double v = (u != 0.0) ? -p / (3.0 * u) : 0.0;
    roots.push_back(u + v - shift);
  } else if (p == 0.0) {
    roots.push_back(std::cbrt(-q) - shift);
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) {
      roots.push_back(m * std::cos(theta - 2.0 * std::numbers::pi * j / 3.0) - shift);
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double P3Problem::stationary_e(double k) const {
  const double comp = (1.0 - gamma) * means.t_p + gamma * k * means.e_p;
  const double comm = (1.0 - gamma) * means.t_m + gamma * k * means.e_m;
  const double target = rho / (1.0 + participation_penalty(k, n));
  if (!(comm > 0.0)) return 0.0;
  if (!(comp > 0.0)) return std::sqrt(target);

  // dC/dE = 0  <=>  c3 E^3 + E^2 - rho/(1+phi) = 0,  c3 = 2 comp / comm.
  const double c3 = 2.0 * comp / comm;
  auto f = [&](double x) { return (c3 * x + 1.0) * x * x - target; };
  auto df = [&](double x) { return (3.0 * c3 * x + 2.0) * x; };

  double best = std::numeric_limits<double>::quiet_NaN();
  double best_obj = std::numeric_limits<double>::infinity();
  for (double r : cubic_real_roots(c3, 1.0, 0.0, -target)) {
    if (!(r > 0.0)) continue;
    const double obj = objective(k, r);
    if (obj < best_obj) {
      best_obj = obj;
      best = r;
    }
  }
  if (!std::isfinite(best)) {
    // Cardano lost the root to cancellation (c3 tiny or huge); f is increasing on
    // (0, inf) so the quadratic/cubic asymptote seeds Newton safely.
    best = std::min(std::sqrt(target), std::cbrt(target / c3));
  }
  for (int it = 0; it < 4; ++it) {
    const double g = df(best);
    if (!(g > 0.0)) break;
    const double next = best - f(best) / g;
    if (!(next > 0.0)) break;
    best = next;
  }
  return best;
}

double closed_form_k(double e, const Population& pop, const CostWeights& weights, double rho, int n) {
  if (!(e >= 1.0)) throw std::invalid_argument("E must be >= 1");
  if (n != pop.size()) throw std::invalid_argument("n differs from population size");
  return P3Problem::from(pop, weights, rho).stationary_k(e);
}

double solve_cubic_e(double k, const Population& pop, const CostWeights& weights, double rho, int n) {
  if (n != pop.size()) throw std::invalid_argument("n differs from population size");
  if (!(k >= 1.0 && k <= n)) throw std::invalid_argument("K outside [1, N]");
  return P3Problem::from(pop, weights, rho).stationary_e(k);
}

ControlPoint default_acs_start(int n) { return ControlPoint{static_cast<double>(n), 10.0, {}}; }

ControlPoint round_to_integer(const P3Problem& problem, const ControlPoint& z) {
  const double kc = std::ceil(z.k), kf = std::floor(z.k);
  const double ec = std::ceil(z.e), ef = std::floor(z.e);
  const std::pair<double, double> combos[] = {{kc, ec}, {kc, ef}, {kf, ec}, {kf, ef}};
  ControlPoint best{};
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;
  for (auto [k, e] : combos) {
    if (k < 1.0 || k > problem.n || e < 1.0) continue;
    const double obj = problem.objective(k, e);
    const bool better = obj < best_obj || (obj == best_obj && (k < best.k || (k == best.k && e < best.e)));
    if (!found || better) {
      best = ControlPoint{k, e, {}};
      best_obj = obj;
      found = true;
    }
  }
  if (!found) throw std::logic_error("no feasible rounding of the ACS point");
  return best;
}

AcsTrace acs_optimize(const P3Problem& problem, const ControlPoint& init, const AcsOptions& opts) {
  init.validate(problem.n);
  if (!(opts.eps0 > 0.0)) throw std::invalid_argument("eps0 must be > 0");
  if (opts.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");

  AcsTrace trace;
  trace.iterates.push_back(ControlPoint{init.k, init.e, {}});
  const double n = problem.n;
  for (int j = 0; j < opts.max_iters; ++j) {
    const ControlPoint& prev = trace.iterates.back();
    const double k = std::clamp(problem.stationary_k(prev.e), 1.0, n);
    const double e = std::max(problem.stationary_e(k), 1.0);
    trace.iterates.push_back(ControlPoint{k, e, {}});
    if (std::hypot(k - prev.k, e - prev.e) <= opts.eps0) {
      trace.converged = true;
      break;
    }
  }
  trace.final_integer_point = round_to_integer(problem, trace.iterates.back());
  trace.objective_at_final =
      problem.objective(trace.final_integer_point.k, trace.final_integer_point.e);
  return trace;
}

AcsTrace acs_optimize(const Population& pop, const CostWeights& weights, double rho, int n,
                      const ControlPoint& init, double eps0, int max_iters) {
  if (n != pop.size()) throw std::invalid_argument("n differs from population size");
  return acs_optimize(P3Problem::from(pop, weights, rho), init, AcsOptions{eps0, max_iters});
}

ControlPoint grid_search_p3(const Population& pop, const CostWeights& weights, double rho, int n,
                            IntRange k_range, IntRange e_range) {
  if (n != pop.size()) throw std::invalid_argument("n differs from population size");
  return kernels::grid_argmin(P3Problem::from(pop, weights, rho), k_range, e_range);
}

bool PropertyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed; });
}

namespace {

std::string point_str(double k, double e) {
  std::ostringstream os;
  os << "(K=" << k << ", E=" << e << ")";
  return os.str();
}

// Large enough that the stationary E sits well inside [1, e_max] for both
// gamma endpoints and every K.
int unimodality_e_max(const P3Problem& base) {
  double top = 10.0;
  for (double g : {0.0, 1.0}) {
    P3Problem p = base;
    p.gamma = g;
    top = std::max({top, p.stationary_e(1.0), p.stationary_e(base.n)});
  }
  return static_cast<int>(std::ceil(3.0 * top)) + 10;
}

std::vector<int> k_probe_values(int n) {
  std::vector<int> ks{1, std::max(1, n / 10), std::max(1, n / 4), std::max(1, n / 2), n};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

PropertyCheck check_biconvex(const P3Problem& base) {
  PropertyCheck c{"theorem1_biconvexity", true, ""};
  const int e_max = unimodality_e_max(base);
  for (double g : {0.0, 0.25, 0.5, 0.75}) {
    P3Problem p = base;
    p.gamma = g;
    const double hk = std::max(1.0, (p.n - 1.0) / 49.0);
    const double he = std::max(1.0, (e_max - 1.0) / 49.0);
    for (int i = 1; i < 49 && c.passed; ++i) {
      const double k = 1.0 + hk * i;
      if (k + hk > p.n) break;
      for (int j = 1; j < 49; ++j) {
        const double e = 1.0 + he * j;
        const double dk = p.objective(k + hk, e) - 2.0 * p.objective(k, e) + p.objective(k - hk, e);
        const double de = p.objective(k, e + he) - 2.0 * p.objective(k, e) + p.objective(k, e - he);
        if (!(dk > 0.0) || !(de > 0.0)) {
          c.passed = false;
          c.witness = "gamma=" + std::to_string(g) + " at " + point_str(k, e);
          break;
        }
      }
    }
  }
  return c;
}

PropertyCheck check_k_monotone(const P3Problem& base, double gamma, bool decreasing,
                               const std::string& name) {
  PropertyCheck c{name, true, ""};
  P3Problem p = base;
  p.gamma = gamma;
  const int e_max = unimodality_e_max(base);
  for (int e = 1; e <= e_max && c.passed; ++e) {
    for (int k = 1; k < p.n; ++k) {
      const double lo = p.objective(k, e), hi = p.objective(k + 1, e);
      if (decreasing ? !(hi < lo) : !(hi > lo)) {
        c.passed = false;
        c.witness = point_str(k, e);
        break;
      }
    }
  }
  const AcsTrace t = acs_optimize(p, default_acs_start(p.n));
  const double want = decreasing ? p.n : 1.0;
  if (t.final_integer_point.k != want) {
    c.passed = false;
    c.witness += " ACS K*=" + std::to_string(t.final_integer_point.k);
  }
  return c;
}

PropertyCheck check_unimodal(const P3Problem& base, double gamma, const std::string& name) {
  PropertyCheck c{name, true, ""};
  P3Problem p = base;
  p.gamma = gamma;
  const int e_max = unimodality_e_max(base);
  for (int k = 1; k <= p.n; ++k) {
    std::vector<int> signs;
    for (int e = 1; e < e_max; ++e) {
      const double diff = p.objective(k, e + 1) - p.objective(k, e);
      if (diff != 0.0) signs.push_back(diff > 0.0 ? 1 : -1);
    }
    int changes = 0;
    for (std::size_t i = 1; i < signs.size(); ++i) changes += signs[i] != signs[i - 1];
    // A stationary point at or beyond E = 2 forces a decrease first; below that
    // the first step may already go up.
    const bool must_dip = p.stationary_e(k) >= 2.0;
    const bool ok = !signs.empty() && signs.back() > 0 && changes <= 1 &&
                    (!must_dip || (signs.front() < 0 && changes == 1));
    if (!ok) {
      c.passed = false;
      c.witness = "K=" + std::to_string(k) + " sign changes=" + std::to_string(changes);
      break;
    }
  }
  return c;
}

PropertyCheck check_e_vs_ratio(const P3Problem& base, double gamma, bool energy,
                               const std::string& name) {
  PropertyCheck c{name, true, ""};
  for (int k : k_probe_values(base.n)) {
    double prev = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double ratio = std::pow(10.0, -2.0 + 5.0 * i / 40.0);
      P3Problem p = base;
      p.gamma = gamma;
      if (energy) {
        p.means.e_m = ratio * p.means.e_p;
      } else {
        p.means.t_m = ratio * p.means.t_p;
      }
      const double e = p.stationary_e(k);
      if (i > 0 && e < prev * (1.0 - 1e-12)) {
        c.passed = false;
        c.witness = "K=" + std::to_string(k) + " ratio=" + std::to_string(ratio);
        return c;
      }
      prev = e;
    }
  }
  return c;
}

PropertyCheck check_gamma_monotone(const P3Problem& base) {
  PropertyCheck c{"theorem4_gamma_monotonicity", true, ""};
  P3Problem p = base;
  // Proportional power: e_m / t_m = e_p / t_p.
  const double power = base.means.e_m / base.means.t_m;
  p.means.e_p = power * p.means.t_p;
  p.means.e_m = power * p.means.t_m;
  double prev_k = std::numeric_limits<double>::infinity();
  double prev_e = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10; ++i) {
    p.gamma = i / 10.0;
    const AcsTrace t = acs_optimize(p, default_acs_start(p.n), AcsOptions{1e-10, 1000});
    const ControlPoint& z = t.final_continuous();
    if (z.k > prev_k * (1.0 + 1e-9) || z.e > prev_e * (1.0 + 1e-9)) {
      c.passed = false;
      c.witness = "gamma=" + std::to_string(p.gamma) + " " + point_str(z.k, z.e);
      return c;
    }
    prev_k = z.k;
    prev_e = z.e;
  }
  return c;
}

}  // namespace

PropertyReport property_check_suite(const Population& pop, double rho, int n) {
  if (n != pop.size()) throw std::invalid_argument("n differs from population size");
  const P3Problem base = P3Problem::from(pop, CostWeights(0.0), rho);
  PropertyReport r;
  r.checks.push_back(check_biconvex(base));
  r.checks.push_back(check_k_monotone(base, 0.0, true, "theorem2_time_decreasing_in_k"));
  r.checks.push_back(check_k_monotone(base, 1.0, false, "theorem3_energy_increasing_in_k"));
  r.checks.push_back(check_unimodal(base, 0.0, "corollary1_time_unimodal_in_e"));
  r.checks.push_back(check_unimodal(base, 1.0, "corollary3_energy_unimodal_in_e"));
  r.checks.push_back(check_e_vs_ratio(base, 0.0, false, "corollary2_e_increases_with_tm_over_tp"));
  r.checks.push_back(check_e_vs_ratio(base, 1.0, true, "corollary4_e_increases_with_em_over_ep"));
  r.checks.push_back(check_gamma_monotone(base));
  return r;
}

}  // namespace costfl
