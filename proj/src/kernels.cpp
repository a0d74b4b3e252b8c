#include "costfl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace costfl::kernels {

namespace {

struct RowBest {
  double value = std::numeric_limits<double>::infinity();
  int k = 0;
  int e = 0;
};

void check_ranges(const P3Problem& p, IntRange k_range, IntRange e_range) {
  if (k_range.size() < 1 || e_range.size() < 1) throw std::invalid_argument("empty grid range");
  if (k_range.lo < 1 || k_range.hi > p.n) throw std::invalid_argument("K range outside [1, N]");
  if (e_range.lo < 1) throw std::invalid_argument("E range must start at >= 1");
}

RowBest scan_row(const P3Problem& p, int k, IntRange e_range) {
  RowBest best{std::numeric_limits<double>::infinity(), k, e_range.lo};
  for (int e = e_range.lo; e <= e_range.hi; ++e) {
    const double v = p.objective(k, e);
    if (v < best.value) best = {v, k, e};
  }
  return best;
}

ControlPoint reduce_rows(const std::vector<RowBest>& rows) {
  RowBest best = rows.front();
  for (const auto& r : rows) {
    if (r.value < best.value) best = r;
  }
  return ControlPoint{static_cast<double>(best.k), static_cast<double>(best.e), {}};
}

struct BlockSums {
  double sum = 0.0;
  double sum_sq = 0.0;
};

BlockSums mc_block(std::span<const double> times, int k, std::int64_t count, const RngSeed& seed) {
  Engine eng = make_engine(seed);
  std::vector<int> idx(times.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int n = static_cast<int>(times.size());
  BlockSums s;
  for (std::int64_t t = 0; t < count; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    // Partial Fisher-Yates; the array never needs resetting because any
    // permutation of it is an equally valid starting point.
    for (int j = 0; j < k; ++j) {
      std::uniform_int_distribution<int> pick(j, n - 1);
      std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick(eng))]);
      mx = std::max(mx, times[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]);
    }
    s.sum += mx;
    s.sum_sq += mx * mx;
  }
  return s;
}

McEstimate finish_mc(const std::vector<BlockSums>& blocks, std::int64_t trials) {
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& b : blocks) {
    sum += b.sum;
    sum_sq += b.sum_sq;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = trials > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n), trials};
}

void check_mc(std::span<const double> times, int k, std::int64_t trials) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (k < 1 || k > static_cast<int>(times.size())) throw std::invalid_argument("K outside [1, N]");
}

std::int64_t block_count(std::int64_t trials) { return (trials + kMcBlock - 1) / kMcBlock; }

std::int64_t block_trials(std::int64_t b, std::int64_t trials) {
  return std::min(kMcBlock, trials - b * kMcBlock);
}

double finish_loss(const ModelState& m, const std::vector<double>& partial, std::int64_t total,
                   double l2) {
  double ce = 0.0;
  for (double p : partial) ce += p;
  double norm = 0.0;
  for (double v : m.w) norm += v * v;
  return ce / static_cast<double>(total) + 0.5 * l2 * norm;
}

}  // namespace

ControlPoint grid_argmin(const P3Problem& problem, IntRange k_range, IntRange e_range) {
  check_ranges(problem, k_range, e_range);
  std::vector<RowBest> rows(static_cast<std::size_t>(k_range.size()));
  const int nk = k_range.size();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nk; ++i) {
    rows[static_cast<std::size_t>(i)] = scan_row(problem, k_range.lo + i, e_range);
  }
  return reduce_rows(rows);
}

ControlPoint grid_argmin_serial(const P3Problem& problem, IntRange k_range, IntRange e_range) {
  check_ranges(problem, k_range, e_range);
  std::vector<RowBest> rows;
  rows.reserve(static_cast<std::size_t>(k_range.size()));
  for (int k = k_range.lo; k <= k_range.hi; ++k) rows.push_back(scan_row(problem, k, e_range));
  return reduce_rows(rows);
}

McEstimate max_of_sample_mc(std::span<const double> times, int k, std::int64_t trials,
                            const RngSeed& seed) {
  check_mc(times, k, trials);
  const std::int64_t nb = block_count(trials);
  std::vector<BlockSums> blocks(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < nb; ++b) {
    blocks[static_cast<std::size_t>(b)] =
        mc_block(times, k, block_trials(b, trials), seed.derive(static_cast<std::uint64_t>(b)));
  }
  return finish_mc(blocks, trials);
}

McEstimate max_of_sample_mc_serial(std::span<const double> times, int k, std::int64_t trials,
                                   const RngSeed& seed) {
  check_mc(times, k, trials);
  const std::int64_t nb = block_count(trials);
  std::vector<BlockSums> blocks;
  blocks.reserve(static_cast<std::size_t>(nb));
  for (std::int64_t b = 0; b < nb; ++b) {
    blocks.push_back(
        mc_block(times, k, block_trials(b, trials), seed.derive(static_cast<std::uint64_t>(b))));
  }
  return finish_mc(blocks, trials);
}

double global_loss(const ModelState& m, const SyntheticDataset& data, double l2) {
  const int n = data.num_clients();
  const LogitEvaluator eval(m);
  std::vector<double> partial(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 4)
  for (int c = 0; c < n; ++c) {
    partial[static_cast<std::size_t>(c)] = eval.cross_entropy_sum(data.clients[static_cast<std::size_t>(c)]);
  }
  return finish_loss(m, partial, data.total_samples(), l2);
}

double global_loss_serial(const ModelState& m, const SyntheticDataset& data, double l2) {
  const LogitEvaluator eval(m);
  std::vector<double> partial;
  partial.reserve(data.clients.size());
  for (const auto& c : data.clients) partial.push_back(eval.cross_entropy_sum(c));
  return finish_loss(m, partial, data.total_samples(), l2);
}

RngSeed client_stream(const RngSeed& seed, int round, int id) {
  return seed.derive("sgd").derive(static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(id));
}

std::vector<ModelState> client_updates(const ModelState& global, const SyntheticDataset& data,
                                       std::span<const int> clients, int steps,
                                       const TrainingConfig& config, int round,
                                       const RngSeed& seed) {
  const int n = static_cast<int>(clients.size());
  std::vector<ModelState> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    const int id = clients[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        local_sgd(global, data.clients.at(static_cast<std::size_t>(id)), steps, config, round,
                  client_stream(seed, round, id));
  }
  return out;
}

std::vector<ModelState> client_updates_serial(const ModelState& global,
                                              const SyntheticDataset& data,
                                              std::span<const int> clients, int steps,
                                              const TrainingConfig& config, int round,
                                              const RngSeed& seed) {
  std::vector<ModelState> out;
  out.reserve(clients.size());
  for (int id : clients) {
    out.push_back(local_sgd(global, data.clients.at(static_cast<std::size_t>(id)), steps, config,
                            round, client_stream(seed, round, id)));
  }
  return out;
}

}  // namespace costfl::kernels
