#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "costfl/cost_model.hpp"
#include "costfl/errors.hpp"
#include "costfl/kernels.hpp"
#include "support.hpp"

using namespace costfl;
using testing::brute_force_expected_max;
using testing::population_with_times;

TEST_CASE("expected_energy") {
  CHECK(expected_energy(testing::homogeneous(3, 1, 1, 1.0, 0.5), 2, 3, 4) == doctest::Approx(28.0));
  // Sampling either device with probability 1/2: (1 + 5) / 2.
  const auto pop = testing::uniform_population({{1, 1, 1.0, 0.0001}, {1, 1, 3.0, 2.0}});
  CHECK(expected_energy(pop, 1, 1, 1) == doctest::Approx((1.0001 + 5.0) / 2.0));
  const auto h = testing::homogeneous(4, 1, 1, 0.3, 0.7);
  CHECK(expected_energy(h, 4, 1, 1) == doctest::Approx(4.0));
  CHECK_THROWS_AS(expected_energy(h, 5, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(expected_energy(h, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("expected_round_time_exact small cases") {
  const auto pop3 = population_with_times({1, 2, 3});
  CHECK(expected_round_time_exact(pop3, 3, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(expected_round_time_exact(pop3, 1, 1) == doctest::Approx(2.0).epsilon(1e-14));
  const auto pop4 = population_with_times({4, 1, 3, 2});  // order must not matter
  CHECK(expected_round_time_exact(pop4, 2, 1) == doctest::Approx(10.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(expected_round_time_exact(pop4, 0, 1), std::invalid_argument);
}

TEST_CASE("order of round times changes with E") {
  // Device 0 is fast at E=1 but slow at E=10.
  const auto pop = testing::uniform_population({{1.0, 0.5, 1, 1}, {0.1, 5.0, 1, 1}});
  for (double e : {1.0, 10.0}) {
    const std::vector<double> t{1.0 * e + 0.5, 0.1 * e + 5.0};
    CHECK(expected_round_time_exact(pop, 1, e) == doctest::Approx(brute_force_expected_max(t, 1)));
    CHECK(expected_round_time_exact(pop, 2, e) == doctest::Approx(brute_force_expected_max(t, 2)));
  }
}

TEST_CASE("straggler weights sum to one up to N=200") {
  for (int n = 1; n <= 200; ++n) {
    for (int k = 1; k <= n; ++k) {
      const auto w = straggler_weights(n, k);
      double s = 0.0;
      for (double v : w) {
        s += v;
        REQUIRE(v >= 0.0);
      }
      REQUIRE(std::abs(s - 1.0) < 1e-9);
      for (int i = 0; i < k - 1; ++i) REQUIRE(w[static_cast<std::size_t>(i)] == 0.0);
    }
  }
}

TEST_CASE("straggler weights match binomial ratios") {
  // C(i-1, k-1) / C(n, k) via lgamma, an independent route.
  auto lc = [](int a, int b) { return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0); };
  for (int n : {5, 37, 150}) {
    for (int k : {1, 2, n / 2, n}) {
      const auto w = straggler_weights(n, k);
      for (int i = k; i <= n; ++i) {
        const double ref = std::exp(lc(i - 1, k - 1) - lc(n, k));
        CHECK(w[static_cast<std::size_t>(i - 1)] == doctest::Approx(ref).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("expected round time is nondecreasing in K") {
  std::mt19937_64 g(11);
  std::vector<DeviceProfile> d;
  for (int i = 0; i < 40; ++i) d.push_back(testing::random_profile(g));
  const auto pop = testing::uniform_population(d);
  for (double e : {1.0, 7.0, 30.0}) {
    double prev = 0.0;
    for (int k = 1; k <= 40; ++k) {
      const double v = expected_round_time_exact(pop, k, e);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("Monte Carlo agrees with 10/3") {
  const std::vector<double> t{1, 2, 3, 4};
  const auto mc = kernels::max_of_sample_mc(t, 2, 1000000, {1, "mc"});
  CHECK(std::abs(mc.mean - 10.0 / 3.0) < 3.0 * mc.std_error);
  const auto all = kernels::max_of_sample_mc(t, 4, 1000, {1, "mc"});
  CHECK(all.mean == 4.0);
  CHECK(all.std_error == 0.0);
  const auto again = kernels::max_of_sample_mc(t, 2, 50000, {1, "mc"});
  const auto again2 = kernels::max_of_sample_mc(t, 2, 50000, {1, "mc"});
  CHECK(again.mean == again2.mean);
  CHECK_THROWS_AS(kernels::max_of_sample_mc(t, 2, 0, {1, "mc"}), std::invalid_argument);
}

TEST_CASE("approx_expected_time") {
  const auto pop = testing::homogeneous(5, 0.1, 2.0, 1, 1);
  CHECK(approx_expected_time(pop, 10, 5) == doctest::Approx(15.0));
  for (int k = 1; k <= 5; ++k) {
    CHECK(approx_expected_time(pop, 4, 3) == doctest::Approx(expected_round_time_exact(pop, k, 4) * 3).epsilon(1e-12));
  }
  std::mt19937_64 g(2);
  std::vector<DeviceProfile> d;
  for (int i = 0; i < 9; ++i) d.push_back(testing::random_profile(g));
  const auto het = testing::uniform_population(d);
  CHECK(approx_expected_time(het, 6, 2) == doctest::Approx(expected_round_time_exact(het, 1, 6) * 2).epsilon(1e-12));
}

TEST_CASE("p3_objective") {
  const auto pop = testing::homogeneous(4, 1, 1, 1, 1);
  const auto v = p3_objective(pop, CostWeights(0), BoundParams::from_absolute(2, 1, 1), {4, 1, {}});
  CHECK(v.value == doctest::Approx(6.0));
  CHECK_FALSE(v.relative);

  SUBCASE("scaling A0 and B0 scales the objective") {
    std::mt19937_64 g(4);
    std::vector<DeviceProfile> d;
    for (int i = 0; i < 12; ++i) d.push_back(testing::random_profile(g));
    const auto p = testing::uniform_population(d);
    for (double c : {0.01, 3.0, 250.0}) {
      const auto a = p3_objective(p, CostWeights(0.4), BoundParams::from_absolute(50, 2, 0.1), {5, 7, {}});
      const auto b = p3_objective(p, CostWeights(0.4), BoundParams::from_absolute(50 * c, 2 * c, 0.1), {5, 7, {}});
      CHECK(b.value == doctest::Approx(c * a.value).epsilon(1e-12));
    }
  }

  SUBCASE("ratio-only values are relative and proportional") {
    const auto abs = p3_objective(pop, CostWeights(0.3), BoundParams::from_absolute(30, 3, 0.5), {2, 3, {}});
    const auto rel = p3_objective(pop, CostWeights(0.3), BoundParams::from_ratio(10, 0.5), {2, 3, {}});
    CHECK(rel.relative);
    CHECK(abs.value == doctest::Approx(rel.value * 3 / 0.5).epsilon(1e-12));
  }

  SUBCASE("single client") {
    const auto one = testing::homogeneous(1, 1, 1, 1, 1);
    const auto r = p3_objective(one, CostWeights(0), BoundParams::from_absolute(2, 1, 1), {1, 1, {}});
    CHECK(r.value == doctest::Approx(6.0));
  }

  CHECK_THROWS_AS(p3_objective(pop, CostWeights(0), BoundParams::from_ratio(1), {5, 1, {}}), std::invalid_argument);
  CHECK_THROWS_AS(p3_objective(pop, CostWeights(0), BoundParams::from_ratio(1), {2, 0.5, {}}), std::invalid_argument);
}

TEST_CASE("exact_expected_total_cost") {
  // Round times 1 and 3, unit energies (1, 1).
  const auto pop = testing::uniform_population({{0.5, 0.5, 1, 1}, {1.5, 1.5, 1, 1}});
  const auto c = exact_expected_total_cost(pop, CostWeights(0.5), 1, 1, 2);
  CHECK(c.expected_time == doctest::Approx(4.0));
  CHECK(c.expected_energy == doctest::Approx(4.0));
  CHECK(c.weighted_total == doctest::Approx(4.0));
  CHECK(exact_expected_total_cost(pop, CostWeights(0), 2, 3, 4).weighted_total ==
        doctest::Approx(exact_expected_total_cost(pop, CostWeights(0), 2, 3, 4).expected_time));
  CHECK(exact_expected_total_cost(pop, CostWeights(1), 2, 3, 4).weighted_total ==
        doctest::Approx(exact_expected_total_cost(pop, CostWeights(1), 2, 3, 4).expected_energy));
}

TEST_CASE("r_required") {
  const auto b = BoundParams::from_absolute(100, 1, 1);
  CHECK(r_required(b, 10, 10, 10) == doctest::Approx(20.0));
  CHECK(r_required(BoundParams::from_absolute(100, 1, 2), 10, 10, 10) == doctest::Approx(10.0));
  CHECK(r_required(b, 1, 1, 10) == doctest::Approx(100 + 2.0));
  CHECK(r_required(b, 10, 2000, 10) / r_required(b, 10, 1000, 10) == doctest::Approx(2.0).epsilon(1e-3));
  CHECK_THROWS_AS(r_required(BoundParams::from_ratio(100), 10, 10, 10), UnidentifiedError);
}
