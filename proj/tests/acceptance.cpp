// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. `--only 3,7` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "costfl/bound_estimator.hpp"
#include "costfl/cost_model.hpp"
#include "costfl/fl_sim.hpp"
#include "costfl/harness.hpp"
#include "costfl/kernels.hpp"
#include "costfl/optimizer.hpp"
#include "harness_support.hpp"
#include "support.hpp"

using namespace costfl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double log_uniform(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(g));
}

const DeviceProfile kSetupMeans{0.1, 2.0, 1e-3, 2e-2};

Population setup_population() {
  return draw_heterogeneous_population(100, kSetupMeans, 1.0 / 3.0, {1, "costs"});
}

// Rho-normalized P3 objective restated from its definition.
double oracle_objective(const UnitMeans& m, int n, double gamma, double rho, double k, double e) {
  const double phi = n == 1 ? 0.0 : (n - k) / (k * (n - 1.0));
  const double per_round = (1 - gamma) * (m.t_p * e + m.t_m) + gamma * k * (m.e_p * e + m.e_m);
  return per_round * (rho + (1 + phi) * e * e) / e;
}

// dC/dE of the objective above; increasing in E.
double oracle_d_de(const UnitMeans& m, int n, double gamma, double rho, double k, double e) {
  const double c = 1 + (n == 1 ? 0.0 : (n - k) / (k * (n - 1.0)));
  const double a1 = (1 - gamma) * m.t_p + gamma * k * m.e_p;
  const double am = (1 - gamma) * m.t_m + gamma * k * m.e_m;
  return 2 * a1 * c * e - am * rho / (e * e) + am * c;
}

UnitMeans random_means(std::mt19937_64& g) {
  return {log_uniform(g, 0.01, 1), log_uniform(g, 0.1, 10), log_uniform(g, 1e-4, 1e-2),
          log_uniform(g, 1e-3, 1e-1)};
}

Population population_of(const UnitMeans& m, int n) {
  return testing::homogeneous(n, m.t_p, m.t_m, m.e_p, m.e_m);
}

// 1. Exact expected round time against subset enumeration.
Outcome exact_round_time() {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  double worst = 0.0;
  for (int n = 1; n <= 12; ++n) {
    for (int draw = 0; draw < 100; ++draw) {
      std::vector<DeviceProfile> devs;
      for (int i = 0; i < n; ++i) devs.push_back({u(g), u(g), 1.0, 1.0});
      const auto pop = testing::uniform_population(devs);
      const double e = 1 + static_cast<double>(g() % 20);
      std::vector<double> t;
      for (const auto& d : devs) t.push_back(d.round_time(e));
      for (int k = 1; k <= n; ++k) {
        const double want = testing::brute_force_expected_max(t, k);
        worst = std::max(worst, std::abs(expected_round_time_exact(pop, k, e) - want) / want);
      }
    }
  }
  return {worst <= 1e-12, fmt("max relative error %.2e over N<=12, all K, 100 draws each", worst)};
}

// 2. Exact expected round time against Monte Carlo at N = 100.
Outcome round_time_at_scale() {
  const auto pop = setup_population();
  const int e = 10;
  std::vector<double> t;
  for (const auto& d : pop.devices()) t.push_back(d.round_time(e));
  bool ok = true;
  std::string detail;
  for (int k : {1, 10, 20, 50, 100}) {
    const RngSeed seed{7, "mc"};
    const double mc = expected_round_time_mc(pop, k, e, 1000000, seed);
    const double se = kernels::max_of_sample_mc(t, k, 1000000, seed).std_error;
    const double exact = expected_round_time_exact(pop, k, e);
    const double z = se > 0 ? std::abs(mc - exact) / se : (std::abs(mc - exact) <= 1e-12 * exact ? 0.0 : 1e9);
    ok = ok && z <= 3.0;
    detail += fmt("K=%g z=%.2f ", k, z);
  }
  return {ok, detail + "(|exact - mc| / se, 1e6 trials)"};
}

// 3. Mean-cost approximation equals the exact time for homogeneous devices and K = 1.
Outcome approximation_cases() {
  std::mt19937_64 g(103);
  double worst = 0.0;
  for (int n : {1, 2, 5, 17, 50, 100}) {
    const auto d = testing::random_profile(g);
    const auto pop = testing::homogeneous(n, d.t_p_unit, d.t_m_unit, d.e_p_unit, d.e_m_unit);
    for (int k = 1; k <= n; ++k) {
      for (double e : {1.0, 7.0, 40.0}) {
        worst = std::max(worst, std::abs(expected_round_time_exact(pop, k, e) - approx_expected_time(pop, e, 1)));
      }
    }
  }
  for (int draw = 0; draw < 100; ++draw) {
    const int n = 2 + static_cast<int>(g() % 150);
    const auto pop = draw_heterogeneous_population(n, kSetupMeans, 1.0 / 3.0, {static_cast<std::uint64_t>(draw), "approx"});
    for (double e : {1.0, 7.0, 40.0}) {
      worst = std::max(worst, std::abs(expected_round_time_exact(pop, 1, e) - approx_expected_time(pop, e, 1)));
    }
  }
  return {worst <= 1e-9, fmt("max |exact - approx| = %.2e", worst)};
}

// 4. Strictly positive second differences in K and in E.
Outcome biconvexity() {
  std::mt19937_64 g(104);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double min_k = std::numeric_limits<double>::infinity(), min_e = min_k;
  for (int draw = 0; draw < 20; ++draw) {
    const UnitMeans m = random_means(g);
    const int n = 60 + static_cast<int>(g() % 140);
    const double gamma = u(g);
    const double rho = log_uniform(g, 10, 1e5);
    const auto pop = population_of(m, n);
    const CostWeights w(gamma);
    const auto bound = BoundParams::from_ratio(rho);
    auto f = [&](double k, double e) { return p3_objective(pop, w, bound, {k, e, {}}).value; };
    for (int k = 2; k <= 51; ++k) {
      for (int e = 2; e <= 51; ++e) {
        const double c = f(k, e);
        const double dk = (f(k + 1, e) - 2 * c + f(k - 1, e)) / c;
        const double de = (f(k, e + 1) - 2 * c + f(k, e - 1)) / c;
        min_k = std::min(min_k, dk);
        min_e = std::min(min_e, de);
      }
    }
  }
  return {min_k > 0 && min_e > 0,
          fmt("min relative second difference: K %.3e, E %.3e (gamma drawn in [0, 1))", min_k, min_e)};
}

// 5. Cubic solution for E against bisection on dC/dE.
Outcome cardano() {
  std::mt19937_64 g(105);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int quadratic = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    UnitMeans m = random_means(g);
    if (draw % 10 == 0) {
      m.t_p = 0.0;
      m.e_p = 0.0;
      ++quadratic;
    }
    const int n = 1 + static_cast<int>(g() % 300);
    const double gamma = u(g);
    const double rho = log_uniform(g, 1, 1e5);
    const double k = 1 + (n - 1) * u(g);
    double e = 0.0;
    if (draw % 10 == 0) {
      e = P3Problem{m, n, gamma, rho}.stationary_e(k);
    } else {
      e = solve_cubic_e(k, population_of(m, n), CostWeights(gamma), rho, n);
    }
    double lo = 1e-9, hi = 1e9;
    for (int i = 0; i < 300; ++i) {
      const double mid = std::sqrt(lo * hi);
      (oracle_d_de(m, n, gamma, rho, k, mid) > 0 ? hi : lo) = mid;
    }
    const double ref = std::sqrt(lo * hi);
    worst = std::max(worst, std::abs(e - ref) / std::max(1.0, ref));
  }
  return {worst <= 1e-9, fmt("max error %.2e over 10000 draws (%g without computation cost)", worst, quadratic)};
}

// 6. Rounded ACS result against the exhaustive integer grid.
Outcome acs_optimality() {
  std::mt19937_64 g(106);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const int n = 100;
  for (int draw = 0; draw < 50; ++draw) {
    const UnitMeans m = random_means(g);
    const double gamma = u(g);
    const double rho = log_uniform(g, 10, 1e5);
    const auto trace = acs_optimize(population_of(m, n), CostWeights(gamma), rho, n, default_acs_start(n));
    const auto& z = trace.final_integer_point;
    const int e_max = std::max(1000, 2 * static_cast<int>(z.e));
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= n; ++k) {
      for (int e = 1; e <= e_max; ++e) best = std::min(best, oracle_objective(m, n, gamma, rho, k, e));
    }
    worst = std::max(worst, oracle_objective(m, n, gamma, rho, z.k, z.e) / best - 1);
  }
  return {worst <= 1e-3, fmt("max relative excess over the grid optimum %.2e (50 draws, N=100)", worst)};
}

// 7. Property suite on the simulation cost population.
Outcome properties() {
  const auto pop = setup_population();
  const auto report = property_check_suite(pop, 3750, 100);
  std::string failed;
  for (const auto& c : report.checks) {
    if (!c.passed) failed += " " + c.name + " (" + c.witness + ")";
  }
  const auto k0 = acs_optimize(pop, CostWeights(0), 3750, 100, default_acs_start(100)).final_integer_point.k;
  const auto k1 = acs_optimize(pop, CostWeights(1), 3750, 100, default_acs_start(100)).final_integer_point.k;
  const bool ok = report.all_passed() && k0 == 100 && k1 == 1;
  return {ok, fmt("%g checks, K*(gamma=0)=%g, K*(gamma=1)=%g", static_cast<double>(report.checks.size()), k0, k1) +
                  (failed.empty() ? "" : "; failed:" + failed)};
}

// 8. Ratio recovery from bound-generated round counts.
Outcome estimator_inversion() {
  std::mt19937_64 g(108);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int trials = 0;
  for (int draw = 0; draw < 500; ++draw) {
    const int n = 2 + static_cast<int>(g() % 300);
    const double a0 = log_uniform(g, 0.1, 1e6), b0 = log_uniform(g, 0.01, 100);
    const double d = draw % 5 == 0 ? 0.0 : u(g) * 100;
    const double fa = 0.5 + u(g), fb = fa * (0.3 + 0.6 * u(g)), f_star = fb * u(g) * 0.9;
    const int probes = 2 + static_cast<int>(g() % 7);
    std::vector<RoundObservation> obs;
    std::set<std::pair<int, int>> seen;
    while (static_cast<int>(obs.size()) < probes) {
      const int k = 1 + static_cast<int>(g() % static_cast<std::uint64_t>(n));
      const int e = 1 + static_cast<int>(g() % 100);
      if (!seen.insert({k, e}).second) continue;
      const double c = a0 + b0 * (1 + (n - k) / (k * (n - 1.0))) * e * e;
      obs.push_back({double(k), double(e), d + c / (e * (fa - f_star)), d + c / (e * (fb - f_star))});
    }
    const auto rep = estimate_ratio(std::span<const RoundObservation>(obs), n);
    worst = std::max(worst, std::abs(rep.ratio_rho / (a0 / b0) - 1));
    ++trials;
  }
  return {worst <= 1e-6, fmt("max relative error %.2e over %g planted draws", worst, trials)};
}

// 9. Realized cost of the proposed (K*, E*) against the sweep optimum.
Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  harness::ExperimentConfig cfg;
  const auto sim = harness::build_simulator(cfg);
  const auto est = harness::run_estimate(cfg, &sim);
  const double rho = est.report.ratio_rho;
  std::printf("    estimated rho = %.1f from %zu probes\n", rho, est.samples.size());

  const std::vector<int> k_grid{1, 2, 3, 5, 10, 20, 50, 100};
  const std::vector<int> e_grid{20, 30, 40};
  std::vector<std::pair<int, int>> cells;
  for (int k : k_grid) {
    for (int e : e_grid) cells.emplace_back(k, e);
  }
  const std::size_t grid_cells = cells.size();
  std::vector<std::pair<int, int>> proposed;
  for (double gamma : cfg.gammas) {
    const auto z = harness::run_optimize(cfg, sim.population(), gamma, rho).trace.final_integer_point;
    const std::pair<int, int> p{static_cast<int>(z.k), static_cast<int>(z.e)};
    proposed.push_back(p);
    if (std::find(cells.begin(), cells.end(), p) == cells.end()) cells.push_back(p);
  }
  const int seeds = 20;
  const auto stats = harness::evaluate_cells(cfg, sim, cells, seeds);
  const std::vector<harness::CellStats> grid(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(grid_cells));

  bool ok = true;
  double gap_sum = 0.0;
  std::printf("    %-6s %-10s %-12s %-10s %-12s %-8s\n", "gamma", "proposed", "cost", "optimum", "cost", "gap");
  for (std::size_t i = 0; i < cfg.gammas.size(); ++i) {
    const double gamma = cfg.gammas[i];
    const auto idx = static_cast<std::size_t>(std::find(cells.begin(), cells.end(), proposed[i]) - cells.begin());
    const auto& p = stats[idx];
    const auto best = harness::empirical_argmin(grid, gamma);
    if (!best || !p.complete()) {
      ok = false;
      std::printf("    %-6g (%d,%d) incomplete=%d\n", gamma, p.k, p.e, p.runs - p.completed);
      continue;
    }
    const auto& b = grid[*best];
    const double gap = p.mean_cost(gamma) / b.mean_cost(gamma) - 1;
    gap_sum += gap;
    ok = ok && gap <= 0.2;
    std::printf("    %-6g (%3d,%3d)  %-12.2f (%3d,%3d)  %-12.2f %+.1f%%\n", gamma, p.k, p.e, p.mean_cost(gamma), b.k,
                b.e, b.mean_cost(gamma), 100 * gap);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok, fmt("mean gap %.1f%% over gammas, %g seeds per cell, %.0f s", 100 * gap_sum / cfg.gammas.size(), seeds, secs)};
}

// 10. Analytic gradient against central differences.
Outcome gradient_check() {
  const auto data = generate_synthetic(1, 1, 3, CountDistribution{}, {1, "data"});
  std::mt19937_64 g(110);
  std::normal_distribution<double> d(0.0, 0.3);
  double worst = 0.0;
  std::vector<double> grad(kNumParams);
  for (int point = 0; point < 20; ++point) {
    const auto& cd = data.clients[static_cast<std::size_t>(point % 3)];
    std::vector<std::size_t> all(cd.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    ModelState m;
    for (auto& v : m.w) v = d(g);
    batch_loss_gradient(m, cd, all, 1e-4, grad);
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double h = 1e-5;
      ModelState a = m, b = m;
      a.w[i] += h;
      b.w[i] -= h;
      const double fd = (client_loss(a, cd, 1e-4) - client_loss(b, cd, 1e-4)) / (2 * h);
      err += (fd - grad[i]) * (fd - grad[i]);
      norm += grad[i] * grad[i];
    }
    worst = std::max(worst, std::sqrt(err / norm));
  }
  return {worst <= 1e-5, fmt("max relative error %.2e at 20 random points", worst)};
}

// 11. Byte-identical CSV output on replay for every command.
Outcome reproducibility() {
  using harness::Command;
  const std::vector<std::pair<Command, std::string>> commands{{Command::kEstimate, "samples.csv"},
                                                              {Command::kOptimize, "trace.csv"},
                                                              {Command::kSimulate, "run.csv"},
                                                              {Command::kSweep, "sweep.csv"},
                                                              {Command::kTradeoff, "tradeoff.csv"}};
  bool ok = true;
  std::string detail;
  for (const auto& [cmd, file] : commands) {
    std::string first;
    for (int replay = 0; replay < 3; ++replay) {
      const auto dir = testing::scratch_dir("replay");
      auto cfg = harness::parse_config(testing::small_config_json(dir.string()));
      if (replay == 2) cfg.workers = 3;
      std::ostringstream out, err;
      const int rc = harness::run_command(cmd, cfg, {true}, out, err);
      const auto text = testing::slurp(dir / file);
      if (rc != harness::kExitOk || text.empty()) {
        ok = false;
        detail += file + " rc=" + std::to_string(rc) + " ";
      }
      if (replay == 0) {
        first = text;
      } else if (text != first) {
        ok = false;
        detail += file + " differs on replay " + std::to_string(replay) + " ";
      }
    }
  }
  return {ok, ok ? "5 commands, 3 replays each (the third with 3 workers), identical bytes" : detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact expected round time vs enumeration", exact_round_time},
      {"exact expected round time vs Monte Carlo, N=100", round_time_at_scale},
      {"mean-cost time approximation, homogeneous and K=1", approximation_cases},
      {"strict biconvexity of the objective", biconvexity},
      {"cubic solution for E vs bisection", cardano},
      {"ACS rounded optimum vs integer grid", acs_optimality},
      {"monotonicity and unimodality properties", properties},
      {"ratio estimator inverts planted round counts", estimator_inversion},
      {"end-to-end optimality gap within 20%", end_to_end},
      {"softmax gradient vs finite differences", gradient_check},
      {"byte-identical CSV on replay", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
