#include "costfl/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace costfl {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void DeviceProfile::validate() const {
  if (!positive_finite(t_p_unit) || !positive_finite(t_m_unit) || !positive_finite(e_p_unit) ||
      !positive_finite(e_m_unit)) {
    throw std::invalid_argument("device unit costs must be positive and finite");
  }
}

Population::Population(std::vector<DeviceProfile> devices, std::vector<double> data_weights)
    : devices_(std::move(devices)), weights_(std::move(data_weights)) {
  if (devices_.empty()) throw std::invalid_argument("population needs at least one device");
  if (weights_.size() != devices_.size()) {
    throw std::invalid_argument("data_weights length differs from device count");
  }
  for (const auto& d : devices_) d.validate();
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("data weight must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("data weights sum to " + std::to_string(sum) + ", expected 1");
  }
  const double n = static_cast<double>(devices_.size());
  for (const auto& d : devices_) {
    means_.t_p += d.t_p_unit;
    means_.t_m += d.t_m_unit;
    means_.e_p += d.e_p_unit;
    means_.e_m += d.e_m_unit;
  }
  means_.t_p /= n;
  means_.t_m /= n;
  means_.e_p /= n;
  means_.e_m /= n;
}

bool Population::homogeneous() const {
  return std::all_of(devices_.begin(), devices_.end(),
                     [&](const DeviceProfile& d) { return d == devices_.front(); });
}

CostWeights::CostWeights(double g) : gamma(g) {
  if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
}

BoundParams BoundParams::from_ratio(double rho, double epsilon) {
  BoundParams b;
  b.ratio_rho = rho;
  b.epsilon = epsilon;
  b.validate();
  return b;
}

BoundParams BoundParams::from_absolute(double a0, double b0, double epsilon) {
  BoundParams b;
  b.a0 = a0;
  b.b0 = b0;
  b.ratio_rho = a0 / b0;
  b.epsilon = epsilon;
  b.validate();
  return b;
}

void BoundParams::validate() const {
  if (!positive_finite(ratio_rho)) throw std::invalid_argument("ratio_rho must be > 0");
  if (!positive_finite(epsilon)) throw std::invalid_argument("epsilon must be > 0");
  if (a0.has_value() != b0.has_value()) {
    throw std::invalid_argument("a0 and b0 must be given together");
  }
  if (absolute()) {
    if (!positive_finite(*a0) || !positive_finite(*b0)) {
      throw std::invalid_argument("a0 and b0 must be > 0");
    }
    if (std::abs(*a0 / *b0 - ratio_rho) > 1e-9 * std::max(1.0, ratio_rho)) {
      throw std::invalid_argument("a0/b0 disagrees with ratio_rho");
    }
  }
}

void ControlPoint::validate(int n) const {
  if (!(k >= 1.0 && k <= static_cast<double>(n))) {
    throw std::invalid_argument("K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  if (!(e >= 1.0) || !std::isfinite(e)) {
    throw std::invalid_argument("E=" + std::to_string(e) + " must be >= 1");
  }
  if (r && !(*r >= 1.0)) throw std::invalid_argument("R must be >= 1");
}

Population build_population(std::span<const DeviceProfile> profiles,
                            std::span<const std::int64_t> sample_counts) {
  if (profiles.empty()) throw std::invalid_argument("empty profile list");
  if (profiles.size() != sample_counts.size()) {
    throw std::invalid_argument("profiles and sample_counts differ in length");
  }
  std::int64_t total = 0;
  for (auto c : sample_counts) {
    if (c <= 0) throw std::invalid_argument("sample counts must be positive");
    total += c;
  }
  std::vector<double> w;
  w.reserve(sample_counts.size());
  for (auto c : sample_counts) w.push_back(static_cast<double>(c) / static_cast<double>(total));
  return Population({profiles.begin(), profiles.end()}, std::move(w));
}

std::vector<DeviceProfile> draw_device_profiles(int n, const DeviceProfile& means,
                                                double rel_std, const RngSeed& seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  means.validate();
  if (!(rel_std >= 0.0 && rel_std < 1.0)) throw std::invalid_argument("rel_std must be in [0, 1)");

  Engine eng = make_engine(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto draw = [&](double mean) {
    const double z = unit(eng);
    if (rel_std == 0.0) return mean;
    return std::max(mean + z * mean * rel_std, kCostFloorFraction * mean);
  };

  std::vector<DeviceProfile> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DeviceProfile d;
    d.t_p_unit = draw(means.t_p_unit);
    d.t_m_unit = draw(means.t_m_unit);
    d.e_p_unit = draw(means.e_p_unit);
    d.e_m_unit = draw(means.e_m_unit);
    out.push_back(d);
  }
  return out;
}

Population draw_heterogeneous_population(int n, const DeviceProfile& means, double rel_std,
                                         const RngSeed& seed) {
  auto devices = draw_device_profiles(n, means, rel_std, seed);
  std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
  return Population(std::move(devices), std::move(w));
}

}  // namespace costfl
