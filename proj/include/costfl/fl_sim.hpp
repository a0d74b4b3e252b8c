#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "costfl/core_model.hpp"
#include "costfl/cost_model.hpp"
#include "costfl/rng.hpp"

namespace costfl {

inline constexpr int kFeatureDim = 60;
inline constexpr int kNumClasses = 10;
inline constexpr int kRowStride = kFeatureDim + 1;  // weights then bias
inline constexpr int kNumParams = kNumClasses * kRowStride;

/// Row-major feature matrix (size() x kFeatureDim) with integer labels.
struct ClientData {
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * kFeatureDim, static_cast<std::size_t>(kFeatureDim)};
  }
  void push(std::span<const double> x, int label);
};

struct SyntheticDataset {
  std::vector<ClientData> clients;

  int num_clients() const { return static_cast<int>(clients.size()); }
  std::vector<std::int64_t> sample_counts() const;
  std::int64_t total_samples() const;
  /// Throws unless every client has >= 1 sample, labels in [0, 10) and finite features.
  void validate() const;
};

/// Unbalanced (log-normal power-law) sample counts matched to a mean and
/// standard deviation, floored at min_count.
struct CountDistribution {
  double mean = 245.0;
  double stddev = 362.0;
  std::int64_t min_count = 10;
};

std::vector<std::int64_t> draw_sample_counts(int n_clients, const CountDistribution& spec,
                                             Engine& eng);

/// Synthetic(alpha, beta): per-client softmax ground-truth models and feature
/// means. Each client's model is a mix of a shared base and a private draw,
/// shifted by u_k ~ N(0, alpha); feature means mix a shared base with a private
/// draw, shifted by B_k ~ N(0, beta). alpha = beta = 0 gives one shared model and
/// one shared feature distribution. Feature covariance is diag(j^-1.2).
SyntheticDataset generate_synthetic(double alpha, double beta, int n_clients,
                                    const CountDistribution& counts, const RngSeed& seed);

/// Label-skew split of a pooled dataset: each client gets samples_per_client
/// samples drawn from exactly labels_per_client distinct labels.
SyntheticDataset partition_by_label(int labels_per_client, int samples_per_client,
                                    const ClientData& pool, int n_clients, const RngSeed& seed);

/// Multinomial logistic regression parameters, kNumClasses rows of
/// (kFeatureDim weights, bias).
struct ModelState {
  std::vector<double> w = std::vector<double>(kNumParams, 0.0);

  bool finite() const;
  bool operator==(const ModelState&) const = default;
};

enum class LrSchedule {
  kInverseRound,  // eta0 / (1 + r)
  kExponential,   // eta0 * decay^r
};

struct TrainingConfig {
  int batch_size = 64;
  double eta0 = 0.1;
  LrSchedule schedule = LrSchedule::kInverseRound;
  double decay = 0.996;
  double l2 = 1e-4;
  double target_loss = 1.05;
  int max_rounds = 3000;

  double learning_rate(int round) const;
  void validate() const;
};

/// Feature-major copy of a model for fast logit evaluation: entry
/// [j * kNumClasses + c] is the weight of feature j for class c, with the
/// biases stored as feature kFeatureDim.
class LogitEvaluator {
 public:
  explicit LogitEvaluator(const ModelState& m);

  void logits(std::span<const double> x, std::array<double, kNumClasses>& z) const;
  double cross_entropy(std::span<const double> x, int label) const;
  /// Sum (not mean) of per-sample cross-entropies over the client's data.
  double cross_entropy_sum(const ClientData& data) const;

 private:
  std::array<double, kNumParams> fm_{};
};

/// Cross-entropy of one sample; logits are z = W x + b.
double sample_cross_entropy(const ModelState& m, std::span<const double> x, int label);

/// Mean cross-entropy over a client's data plus (l2/2) ||w||^2.
double client_loss(const ModelState& m, const ClientData& data, double l2);

/// Mean regularized loss over the listed samples; writes its gradient to grad.
double batch_loss_gradient(const ModelState& m, const ClientData& data,
                           std::span<const std::size_t> batch, double l2, std::span<double> grad);

/// `steps` mini-batch SGD steps at the learning rate of `round`.
ModelState local_sgd(const ModelState& model, const ClientData& data, int steps,
                     const TrainingConfig& config, int round, const RngSeed& seed);

struct RoundRecord {
  int round = 0;  // 1-based
  std::vector<int> sampled;
  double loss = 0.0;
  double round_time = 0.0;
  double round_energy = 0.0;
  double cumulative_time = 0.0;
  double cumulative_energy = 0.0;
};

struct FedRunRecord {
  int k = 0;
  int e = 0;
  double initial_loss = 0.0;
  double target_loss = 0.0;
  bool complete = false;
  std::vector<RoundRecord> rounds;

  int rounds_executed() const { return static_cast<int>(rounds.size()); }
  double total_time() const { return rounds.empty() ? 0.0 : rounds.back().cumulative_time; }
  double total_energy() const { return rounds.empty() ? 0.0 : rounds.back().cumulative_energy; }
  /// First 1-based round whose loss is <= threshold.
  std::optional<int> first_round_at_or_below(double threshold) const;
};

/// Holds one population/dataset/config triple; runs are independent and
/// a pure function of (k, e, seed).
class FedSimulator {
 public:
  FedSimulator(Population pop, SyntheticDataset data, TrainingConfig config);

  const Population& population() const { return pop_; }
  const SyntheticDataset& dataset() const { return data_; }
  const TrainingConfig& config() const { return config_; }

  /// Runs until the loss reaches `target` (config target when absent) or
  /// max_rounds is exhausted.
  FedRunRecord run(int k, int e, const RngSeed& seed, std::optional<double> target = {},
                   std::optional<int> max_rounds = {}) const;

  double global_loss(const ModelState& m) const;

 private:
  Population pop_;
  SyntheticDataset data_;
  TrainingConfig config_;
};

FedRunRecord fedavg_run(const Population& pop, const SyntheticDataset& dataset, int k, int e,
                        const TrainingConfig& config, const RngSeed& seed);

/// Realized cost of a complete run. Throws IncompleteRunError otherwise.
CostBreakdown measure_cost_to_target(const FedRunRecord& record, const CostWeights& weights);

}  // namespace costfl
