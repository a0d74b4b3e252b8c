#include "costfl/bound_estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "costfl/cost_model.hpp"
#include "costfl/errors.hpp"

namespace costfl {

void EstimationSample::validate() const {
  if (k < 1 || e < 1) throw std::invalid_argument("probe K and E must be >= 1");
  if (rounds_fa < 1) throw std::invalid_argument("rounds_fa must be >= 1");
  if (rounds_fb <= rounds_fa) throw std::invalid_argument("rounds_fb must exceed rounds_fa");
}

EstimationSample probe_pair(const FedSimulator& sim, int k, int e, double f_a, double f_b,
                            int max_rounds, const RngSeed& seed) {
  if (!(f_b < f_a)) throw std::invalid_argument("f_b must be below f_a");
  const FedRunRecord rec = sim.run(k, e, seed, f_b, max_rounds);
  const auto ra = rec.first_round_at_or_below(f_a);
  const std::string where = " for probe (K=" + std::to_string(k) + ", E=" + std::to_string(e) +
                            ") within " + std::to_string(max_rounds) + " rounds";
  if (!ra) throw UnreachableLossError("loss F_a=" + std::to_string(f_a) + " unreachable" + where, "F_a");
  if (!rec.complete) throw UnreachableLossError("loss F_b=" + std::to_string(f_b) + " unreachable" + where, "F_b");

  EstimationSample s{k, e, *ra, rec.rounds_executed(), seed.seed};
  if (s.rounds_fb == s.rounds_fa) {
    throw UnreachableLossError("F_a and F_b crossed in the same round" + where +
                                   "; widen the gap between the estimation losses",
                               "F_b");
  }
  return s;
}

double pair_ratio(const RoundObservation& i, const RoundObservation& j, int n) {
  // E_i dR_i / (E_j dR_j) = (rho + c_i) / (rho + c_j),  c = (1 + phi(K)) E^2
  //   => rho = (c_i - q c_j) / (q - 1).
  const double q = (i.e * (i.rounds_fb - i.rounds_fa)) / (j.e * (j.rounds_fb - j.rounds_fa));
  const double ci = (1.0 + participation_penalty(i.k, n)) * i.e * i.e;
  const double cj = (1.0 + participation_penalty(j.k, n)) * j.e * j.e;
  if (!std::isfinite(q) || q == 1.0) return std::numeric_limits<double>::quiet_NaN();
  return (ci - q * cj) / (q - 1.0);
}

EstimationReport estimate_ratio(std::span<const RoundObservation> obs, int n) {
  if (obs.size() < 2) throw std::invalid_argument("need at least two probes");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  EstimationReport rep;
  for (std::size_t a = 0; a < obs.size(); ++a) {
    for (std::size_t b = a + 1; b < obs.size(); ++b) {
      const double rho = pair_ratio(obs[a], obs[b], n);
      if (std::isfinite(rho) && rho > 0.0) {
        rep.pair_estimates.push_back(rho);
      } else {
        ++rep.discarded_pairs;
      }
    }
  }
  if (rep.pair_estimates.empty()) {
    throw InconsistentSamplesError("all " + std::to_string(rep.discarded_pairs) +
                                   " probe pairs gave degenerate or non-positive A0/B0");
  }
  double sum = 0.0;
  for (double r : rep.pair_estimates) sum += r;
  rep.ratio_rho = sum / static_cast<double>(rep.pair_estimates.size());
  double iters = 0.0;
  for (const auto& o : obs) iters += o.rounds_fb * o.e;
  rep.overhead_iterations = static_cast<std::int64_t>(std::llround(iters));
  return rep;
}

EstimationReport estimate_ratio(std::span<const EstimationSample> samples, int n) {
  std::vector<RoundObservation> obs;
  obs.reserve(samples.size());
  std::int64_t iters = 0;
  for (const auto& s : samples) {
    s.validate();
    if (s.k > n) throw std::invalid_argument("probe K exceeds N");
    obs.push_back({static_cast<double>(s.k), static_cast<double>(s.e),
                   static_cast<double>(s.rounds_fa), static_cast<double>(s.rounds_fb)});
    iters += s.rounds_fb * s.e;
  }
  EstimationReport rep = estimate_ratio(std::span<const RoundObservation>(obs), n);
  rep.overhead_iterations = iters;
  return rep;
}

double overhead_ratio(std::span<const EstimationSample> samples, const BoundParams& bound,
                      const ControlPoint& final_point, int n, double f_target_gap) {
  if (!(f_target_gap > 0.0)) throw std::invalid_argument("target gap F_R - F* must be > 0");
  bound.validate();
  final_point.validate(n);
  double iters = 0.0;
  for (const auto& s : samples) iters += static_cast<double>(s.rounds_fb) * s.e;
  const double a0 = bound.absolute() ? *bound.a0 : bound.ratio_rho;
  const double b0 = bound.absolute() ? *bound.b0 : 1.0;
  const double denom =
      a0 + b0 * (1.0 + participation_penalty(final_point.k, n)) * final_point.e * final_point.e;
  return iters * f_target_gap / denom;
}

}  // namespace costfl
