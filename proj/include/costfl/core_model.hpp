#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "costfl/rng.hpp"

namespace costfl {

/// Unit costs of one client: seconds and joules per local iteration (p) and
/// per communication round (m).
struct DeviceProfile {
  double t_p_unit = 0.0;
  double t_m_unit = 0.0;
  double e_p_unit = 0.0;
  double e_m_unit = 0.0;

  /// Throws std::invalid_argument unless all four fields are finite and > 0.
  void validate() const;

  double round_time(double local_iters) const { return t_p_unit * local_iters + t_m_unit; }
  double round_energy(double local_iters) const { return e_p_unit * local_iters + e_m_unit; }

  bool operator==(const DeviceProfile&) const = default;
};

/// Population means of the four unit costs.
struct UnitMeans {
  double t_p = 0.0;
  double t_m = 0.0;
  double e_p = 0.0;
  double e_m = 0.0;
};

/// Ordered client devices with their data weights p_k = n_k / n.
class Population {
 public:
  Population(std::vector<DeviceProfile> devices, std::vector<double> data_weights);

  int size() const { return static_cast<int>(devices_.size()); }
  const std::vector<DeviceProfile>& devices() const { return devices_; }
  const std::vector<double>& data_weights() const { return weights_; }
  const DeviceProfile& device(int i) const { return devices_.at(static_cast<std::size_t>(i)); }
  const UnitMeans& means() const { return means_; }

  /// True when every device has identical unit costs.
  bool homogeneous() const;

 private:
  std::vector<DeviceProfile> devices_;
  std::vector<double> weights_;
  UnitMeans means_;
};

struct CostWeights {
  double gamma = 0.0;

  explicit CostWeights(double g);
  double blend(double time, double energy) const { return (1.0 - gamma) * time + gamma * energy; }
};

/// Convergence-bound constants. Only the ratio A0/B0 is identified by the
/// estimator; absolute values are optional.
struct BoundParams {
  double ratio_rho = 0.0;
  std::optional<double> a0;
  std::optional<double> b0;
  double epsilon = 1.0;

  static BoundParams from_ratio(double rho, double epsilon = 1.0);
  static BoundParams from_absolute(double a0, double b0, double epsilon);

  bool absolute() const { return a0.has_value() && b0.has_value(); }
  void validate() const;
};

/// Candidate (K, E) with optional R; continuous while searching.
struct ControlPoint {
  double k = 1.0;
  double e = 1.0;
  std::optional<double> r;

  /// Checks 1 <= k <= n, e >= 1 and r >= 1 when present.
  void validate(int n) const;
  bool operator==(const ControlPoint&) const = default;
};

Population build_population(std::span<const DeviceProfile> profiles,
                            std::span<const std::int64_t> sample_counts);

/// Draws every field of every device from Normal(mean, mean * rel_std),
/// floored at 1% of the mean. Data weights are uniform.
Population draw_heterogeneous_population(int n, const DeviceProfile& means, double rel_std,
                                         const RngSeed& seed);

/// Same draw, returning only the device list.
std::vector<DeviceProfile> draw_device_profiles(int n, const DeviceProfile& means,
                                                double rel_std, const RngSeed& seed);

inline constexpr double kCostFloorFraction = 0.01;

}  // namespace costfl
