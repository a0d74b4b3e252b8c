#include "costfl/fl_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "costfl/errors.hpp"
#include "costfl/kernels.hpp"

namespace costfl {

void ClientData::push(std::span<const double> x, int label) {
  if (x.size() != static_cast<std::size_t>(kFeatureDim)) {
    throw std::invalid_argument("feature row must have 60 entries");
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

std::vector<std::int64_t> SyntheticDataset::sample_counts() const {
  std::vector<std::int64_t> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(static_cast<std::int64_t>(c.size()));
  return out;
}

std::int64_t SyntheticDataset::total_samples() const {
  std::int64_t n = 0;
  for (const auto& c : clients) n += static_cast<std::int64_t>(c.size());
  return n;
}

void SyntheticDataset::validate() const {
  if (clients.empty()) throw std::invalid_argument("dataset has no clients");
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto& c = clients[k];
    if (c.size() < 1) throw std::invalid_argument("client " + std::to_string(k) + " has no samples");
    if (c.features.size() != c.size() * kFeatureDim) {
      throw std::invalid_argument("client " + std::to_string(k) + " feature matrix has wrong shape");
    }
    for (int y : c.labels) {
      if (y < 0 || y >= kNumClasses) throw std::invalid_argument("label outside [0, 10)");
    }
    for (double v : c.features) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    }
  }
}

std::vector<std::int64_t> draw_sample_counts(int n_clients, const CountDistribution& spec,
                                             Engine& eng) {
  if (n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
  if (!(spec.mean > 0.0) || !(spec.stddev >= 0.0)) {
    throw std::invalid_argument("count distribution needs mean > 0 and stddev >= 0");
  }
  // Log-normal shape with the requested coefficient of variation, then an affine
  // map onto the exact sample mean and standard deviation.
  const double cv = spec.stddev / spec.mean;
  const double sigma = std::sqrt(std::log1p(cv * cv));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(n_clients));
  for (auto& v : raw) v = std::exp(sigma * unit(eng));

  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / n_clients;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n_clients);

  std::vector<std::int64_t> counts;
  counts.reserve(raw.size());
  for (double v : raw) {
    const double scaled = sd > 0.0 ? spec.mean + (v - mean) * spec.stddev / sd : spec.mean;
    counts.push_back(std::max(spec.min_count, static_cast<std::int64_t>(std::llround(scaled))));
  }
  return counts;
}

namespace {

// Fraction of a client's draw that is private rather than shared; 1 at and
// above unit heterogeneity.
double private_fraction(double heterogeneity) { return std::min(heterogeneity, 1.0); }

}  // namespace

SyntheticDataset generate_synthetic(double alpha, double beta, int n_clients,
                                    const CountDistribution& counts, const RngSeed& seed) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("alpha, beta must be >= 0");
  if (n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");

  Engine count_eng = make_engine(seed.derive("counts"));
  const auto n_k = draw_sample_counts(n_clients, counts, count_eng);

  Engine eng = make_engine(seed.derive("models"));
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<double> base_model(kNumParams);
  for (auto& v : base_model) v = unit(eng);
  std::array<double, kFeatureDim> base_mean{};
  for (auto& v : base_mean) v = unit(eng);
  std::array<double, kFeatureDim> feat_sd{};
  for (int j = 0; j < kFeatureDim; ++j) feat_sd[static_cast<std::size_t>(j)] = std::sqrt(std::pow(j + 1.0, -1.2));

  const double ha = private_fraction(alpha), hb = private_fraction(beta);
  const double sa = std::sqrt(1.0 - ha), pa = std::sqrt(ha);
  const double sb = std::sqrt(1.0 - hb), pb = std::sqrt(hb);

  SyntheticDataset ds;
  ds.clients.resize(static_cast<std::size_t>(n_clients));
  std::vector<double> model(kNumParams);
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> x{};
  for (int k = 0; k < n_clients; ++k) {
    const double u = alpha * unit(eng);
    const double shift = beta * unit(eng);
    for (int i = 0; i < kNumParams; ++i) {
      model[static_cast<std::size_t>(i)] = sa * base_model[static_cast<std::size_t>(i)] + pa * unit(eng) + u;
    }
    for (int j = 0; j < kFeatureDim; ++j) {
      mean[static_cast<std::size_t>(j)] = sb * base_mean[static_cast<std::size_t>(j)] + pb * unit(eng) + shift;
    }

    Engine sample_eng = make_engine(seed.derive("samples").derive(static_cast<std::uint64_t>(k)));
    ClientData& cd = ds.clients[static_cast<std::size_t>(k)];
    const auto count = static_cast<std::size_t>(n_k[static_cast<std::size_t>(k)]);
    cd.features.reserve(count * kFeatureDim);
    cd.labels.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
      for (int j = 0; j < kFeatureDim; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        x[jj] = mean[jj] + feat_sd[jj] * unit(sample_eng);
      }
      int best = 0;
      double best_logit = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < kNumClasses; ++c) {
        const double* row = model.data() + c * kRowStride;
        double z = row[kFeatureDim];
        for (int j = 0; j < kFeatureDim; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
        if (z > best_logit) {
          best_logit = z;
          best = c;
        }
      }
      cd.push(x, best);
    }
  }
  return ds;
}

SyntheticDataset partition_by_label(int labels_per_client, int samples_per_client,
                                    const ClientData& pool, int n_clients, const RngSeed& seed) {
  if (labels_per_client < 1 || labels_per_client > kNumClasses) {
    throw std::invalid_argument("labels_per_client must be in [1, 10]");
  }
  if (samples_per_client < labels_per_client) {
    throw std::invalid_argument("samples_per_client must be >= labels_per_client");
  }
  if (n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");

  Engine eng = make_engine(seed);
  std::array<std::vector<std::size_t>, kNumClasses> by_label;
  for (std::size_t i = 0; i < pool.size(); ++i) by_label[static_cast<std::size_t>(pool.labels[i])].push_back(i);
  for (auto& v : by_label) std::shuffle(v.begin(), v.end(), eng);

  std::array<int, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), eng);

  // Client c takes consecutive labels of the shuffled order, so label use is balanced.
  std::vector<std::vector<int>> assigned(static_cast<std::size_t>(n_clients));
  std::array<std::size_t, kNumClasses> demand{};
  for (int c = 0; c < n_clients; ++c) {
    for (int j = 0; j < labels_per_client; ++j) {
      const int label = order[static_cast<std::size_t>((c * labels_per_client + j) % kNumClasses)];
      const int share = samples_per_client / labels_per_client + (j < samples_per_client % labels_per_client ? 1 : 0);
      assigned[static_cast<std::size_t>(c)].push_back(label);
      demand[static_cast<std::size_t>(label)] += static_cast<std::size_t>(share);
    }
  }
  for (int l = 0; l < kNumClasses; ++l) {
    if (demand[static_cast<std::size_t>(l)] > by_label[static_cast<std::size_t>(l)].size()) {
      throw std::invalid_argument("insufficient pool: label " + std::to_string(l) + " needs " +
                                  std::to_string(demand[static_cast<std::size_t>(l)]) + " samples, has " +
                                  std::to_string(by_label[static_cast<std::size_t>(l)].size()));
    }
  }

  std::array<std::size_t, kNumClasses> cursor{};
  SyntheticDataset ds;
  ds.clients.resize(static_cast<std::size_t>(n_clients));
  for (int c = 0; c < n_clients; ++c) {
    ClientData& cd = ds.clients[static_cast<std::size_t>(c)];
    const auto& labels = assigned[static_cast<std::size_t>(c)];
    for (int j = 0; j < labels_per_client; ++j) {
      const auto label = static_cast<std::size_t>(labels[static_cast<std::size_t>(j)]);
      const int share = samples_per_client / labels_per_client + (j < samples_per_client % labels_per_client ? 1 : 0);
      for (int s = 0; s < share; ++s) {
        const std::size_t idx = by_label[label][cursor[label]++];
        cd.push(pool.row(idx), pool.labels[idx]);
      }
    }
  }
  return ds;
}

bool ModelState::finite() const {
  return std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
}

double TrainingConfig::learning_rate(int round) const {
  switch (schedule) {
    case LrSchedule::kInverseRound:
      return eta0 / (1.0 + round);
    case LrSchedule::kExponential:
      return eta0 * std::pow(decay, round);
  }
  return eta0;
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(eta0 > 0.0)) throw std::invalid_argument("eta0 must be > 0");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  if (schedule == LrSchedule::kExponential && !(decay > 0.0 && decay <= 1.0)) {
    throw std::invalid_argument("decay must be in (0, 1]");
  }
}

LogitEvaluator::LogitEvaluator(const ModelState& m) {
  for (int c = 0; c < kNumClasses; ++c) {
    for (int j = 0; j < kRowStride; ++j) {
      fm_[static_cast<std::size_t>(j * kNumClasses + c)] = m.w[static_cast<std::size_t>(c * kRowStride + j)];
    }
  }
}

void LogitEvaluator::logits(std::span<const double> x, std::array<double, kNumClasses>& z) const {
  // Local accumulators keep z in registers; writing through the reference
  // directly would force a store per feature.
  double acc[kNumClasses];
  const double* bias = fm_.data() + kFeatureDim * kNumClasses;
  for (int c = 0; c < kNumClasses; ++c) acc[c] = bias[c];
  const double* xp = x.data();
  for (int j = 0; j < kFeatureDim; ++j) {
    const double xj = xp[j];
    const double* col = fm_.data() + j * kNumClasses;
    for (int c = 0; c < kNumClasses; ++c) acc[c] += col[c] * xj;
  }
  for (int c = 0; c < kNumClasses; ++c) z[static_cast<std::size_t>(c)] = acc[c];
}

double LogitEvaluator::cross_entropy(std::span<const double> x, int label) const {
  std::array<double, kNumClasses> z{};
  logits(x, z);
  const double mx = *std::max_element(z.begin(), z.end());
  double se = 0.0;
  for (double v : z) se += std::exp(v - mx);
  return mx + std::log(se) - z[static_cast<std::size_t>(label)];
}

double LogitEvaluator::cross_entropy_sum(const ClientData& data) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) acc += cross_entropy(data.row(i), data.labels[i]);
  return acc;
}

namespace {

double squared_norm(const ModelState& m) {
  double s = 0.0;
  for (double v : m.w) s += v * v;
  return s;
}

}  // namespace

double sample_cross_entropy(const ModelState& m, std::span<const double> x, int label) {
  return LogitEvaluator(m).cross_entropy(x, label);
}

double client_loss(const ModelState& m, const ClientData& data, double l2) {
  return LogitEvaluator(m).cross_entropy_sum(data) / static_cast<double>(data.size()) +
         0.5 * l2 * squared_norm(m);
}

double batch_loss_gradient(const ModelState& m, const ClientData& data,
                           std::span<const std::size_t> batch, double l2, std::span<double> grad) {
  if (grad.size() != static_cast<std::size_t>(kNumParams)) throw std::invalid_argument("gradient size");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::fill(grad.begin(), grad.end(), 0.0);
  const LogitEvaluator eval(m);
  std::array<double, kNumClasses> z{};
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch) {
    const auto x = data.row(idx);
    const int y = data.labels[idx];
    eval.logits(x, z);
    const double mx = *std::max_element(z.begin(), z.end());
    const double zy = z[static_cast<std::size_t>(y)];
    double se = 0.0;
    for (auto& v : z) {
      v = std::exp(v - mx);
      se += v;
    }
    loss += mx + std::log(se) - zy;
    for (int c = 0; c < kNumClasses; ++c) {
      const double coef = (z[static_cast<std::size_t>(c)] / se - (c == y ? 1.0 : 0.0)) * inv_b;
      double* g = grad.data() + c * kRowStride;
      for (int j = 0; j < kFeatureDim; ++j) g[j] += coef * x[static_cast<std::size_t>(j)];
      g[kFeatureDim] += coef;
    }
  }
  for (int i = 0; i < kNumParams; ++i) grad[static_cast<std::size_t>(i)] += l2 * m.w[static_cast<std::size_t>(i)];
  return loss * inv_b + 0.5 * l2 * squared_norm(m);
}

ModelState local_sgd(const ModelState& model, const ClientData& data, int steps,
                     const TrainingConfig& config, int round, const RngSeed& seed) {
  if (steps < 1) throw std::invalid_argument("local steps must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("client has no data");
  ModelState m = model;
  const double lr = config.learning_rate(round);
  if (lr == 0.0) return m;

  Engine eng = make_engine(seed);
  const std::size_t n = data.size();
  const std::size_t b = std::min(n, static_cast<std::size_t>(config.batch_size));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> grad(kNumParams);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < b; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, n - 1);
      std::swap(idx[j], idx[pick(eng)]);
    }
    batch_loss_gradient(m, data, std::span<const std::size_t>(idx.data(), b), config.l2, grad);
    for (int i = 0; i < kNumParams; ++i) m.w[static_cast<std::size_t>(i)] -= lr * grad[static_cast<std::size_t>(i)];
  }
  return m;
}

std::optional<int> FedRunRecord::first_round_at_or_below(double threshold) const {
  for (const auto& r : rounds) {
    if (r.loss <= threshold) return r.round;
  }
  return std::nullopt;
}

FedSimulator::FedSimulator(Population pop, SyntheticDataset data, TrainingConfig config)
    : pop_(std::move(pop)), data_(std::move(data)), config_(config) {
  data_.validate();
  config_.validate();
  if (pop_.size() != data_.num_clients()) {
    throw std::invalid_argument("population and dataset client counts differ");
  }
}

double FedSimulator::global_loss(const ModelState& m) const {
  return kernels::global_loss(m, data_, config_.l2);
}

FedRunRecord FedSimulator::run(int k, int e, const RngSeed& seed, std::optional<double> target,
                               std::optional<int> max_rounds) const {
  const int n = pop_.size();
  if (k < 1 || k > n) throw std::invalid_argument("K outside [1, N]");
  if (e < 1) throw std::invalid_argument("E must be >= 1");
  const int budget = max_rounds.value_or(config_.max_rounds);
  if (budget < 1) throw std::invalid_argument("max_rounds must be >= 1");

  FedRunRecord rec;
  rec.k = k;
  rec.e = e;
  rec.target_loss = target.value_or(config_.target_loss);

  ModelState w;
  rec.initial_loss = global_loss(w);

  Engine sampler = make_engine(seed.derive("sampling"));
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  const auto& p = pop_.data_weights();

  double cum_time = 0.0, cum_energy = 0.0;
  for (int r = 0; r < budget; ++r) {
    for (int j = 0; j < k; ++j) {
      std::uniform_int_distribution<int> pick(j, n - 1);
      std::swap(ids[static_cast<std::size_t>(j)], ids[static_cast<std::size_t>(pick(sampler))]);
    }
    std::vector<int> sampled(ids.begin(), ids.begin() + k);
    std::sort(sampled.begin(), sampled.end());

    const auto updates = kernels::client_updates(w, data_, sampled, e, config_, r, seed);

    double mass = 0.0;
    for (int id : sampled) mass += p[static_cast<std::size_t>(id)];
    std::fill(w.w.begin(), w.w.end(), 0.0);
    double round_time = 0.0, round_energy = 0.0;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const int id = sampled[i];
      const double coef = p[static_cast<std::size_t>(id)] / mass;
      for (int q = 0; q < kNumParams; ++q) w.w[static_cast<std::size_t>(q)] += coef * updates[i].w[static_cast<std::size_t>(q)];
      const auto& dev = pop_.device(id);
      round_time = std::max(round_time, dev.round_time(e));
      round_energy += dev.round_energy(e);
    }
    cum_time += round_time;
    cum_energy += round_energy;

    RoundRecord rr;
    rr.round = r + 1;
    rr.sampled = std::move(sampled);
    rr.loss = global_loss(w);
    rr.round_time = round_time;
    rr.round_energy = round_energy;
    rr.cumulative_time = cum_time;
    rr.cumulative_energy = cum_energy;
    const bool done = rr.loss <= rec.target_loss;
    rec.rounds.push_back(std::move(rr));
    if (done) {
      rec.complete = true;
      break;
    }
  }
  return rec;
}

FedRunRecord fedavg_run(const Population& pop, const SyntheticDataset& dataset, int k, int e,
                        const TrainingConfig& config, const RngSeed& seed) {
  return FedSimulator(pop, dataset, config).run(k, e, seed);
}

CostBreakdown measure_cost_to_target(const FedRunRecord& record, const CostWeights& weights) {
  if (!record.complete) {
    throw IncompleteRunError("run did not reach target loss " + std::to_string(record.target_loss) +
                             " within " + std::to_string(record.rounds_executed()) + " rounds");
  }
  CostBreakdown c;
  c.expected_time = record.total_time();
  c.expected_energy = record.total_energy();
  c.weighted_total = weights.blend(c.expected_time, c.expected_energy);
  return c;
}

}  // namespace costfl
