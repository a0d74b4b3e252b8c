#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "costfl/core_model.hpp"

namespace testing {

inline costfl::Population uniform_population(std::vector<costfl::DeviceProfile> devices) {
  const std::size_t n = devices.size();
  return costfl::Population(std::move(devices), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

/// Devices whose round time at E = 1 is exactly t_i (t_m = t_i - t_p).
inline costfl::Population population_with_times(const std::vector<double>& t, double t_p = 1e-3) {
  std::vector<costfl::DeviceProfile> d;
  for (double v : t) d.push_back({t_p, v - t_p, 1.0, 1.0});
  return uniform_population(d);
}

inline costfl::Population homogeneous(int n, double t_p, double t_m, double e_p, double e_m) {
  return uniform_population(std::vector<costfl::DeviceProfile>(static_cast<std::size_t>(n), {t_p, t_m, e_p, e_m}));
}

/// Mean of max over every k-subset of t, by explicit enumeration.
inline double brute_force_expected_max(const std::vector<double>& t, int k) {
  const int n = static_cast<int>(t.size());
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.end() - k, pick.end(), true);
  double sum = 0.0;
  long count = 0;
  do {
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      if (pick[static_cast<std::size_t>(i)]) mx = std::max(mx, t[static_cast<std::size_t>(i)]);
    }
    sum += mx;
    ++count;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return sum / static_cast<double>(count);
}

inline costfl::DeviceProfile random_profile(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.05, 3.0);
  return {u(g), u(g), u(g) * 1e-2, u(g) * 1e-1};
}

}  // namespace testing
