#include "costfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "costfl/errors.hpp"
#include "costfl/io.hpp"

namespace costfl::harness {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw SchemaError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + "." + key + " has the wrong type");
  }
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + " must be a number");
  return v.get<double>();
}

DeviceProfile parse_profile(const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"t_p", "t_m", "e_p", "e_m"});
  DeviceProfile p;
  read(obj, "t_p", where, p.t_p_unit);
  read(obj, "t_m", where, p.t_m_unit);
  read(obj, "e_p", where, p.e_p_unit);
  read(obj, "e_m", where, p.e_m_unit);
  return p;
}

json profile_json(const DeviceProfile& p) {
  return {{"t_p", p.t_p_unit}, {"t_m", p.t_m_unit}, {"e_p", p.e_p_unit}, {"e_m", p.e_m_unit}};
}

std::pair<int, int> parse_point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw SchemaError(where + " must be a [K, E] pair of integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

IntRange parse_range(const json& v, const std::string& where) {
  const auto p = parse_point(v, where);
  return {p.first, p.second};
}

void parse_population(const json& obj, PopulationSpec& p) {
  const std::string w = "population";
  reject_unknown(obj, w, {"n", "means", "rel_std", "profiles"});
  read(obj, "n", w, p.n);
  if (obj.contains("means")) p.means = parse_profile(obj["means"], w + ".means");
  read(obj, "rel_std", w, p.rel_std);
  if (obj.contains("profiles")) {
    if (!obj["profiles"].is_array()) throw SchemaError("population.profiles must be an array");
    p.profiles.clear();
    for (std::size_t i = 0; i < obj["profiles"].size(); ++i) {
      p.profiles.push_back(parse_profile(obj["profiles"][i], w + ".profiles[" + std::to_string(i) + "]"));
    }
  }
}

void parse_dataset(const json& obj, DatasetSpec& d) {
  const std::string w = "dataset";
  reject_unknown(obj, w, {"kind", "alpha", "beta", "count_mean", "count_std", "min_count",
                          "labels_per_client", "samples_per_client", "pool_size", "path"});
  std::string kind = "synthetic";
  read(obj, "kind", w, kind);
  if (kind == "synthetic") {
    d.kind = DatasetSpec::Kind::kSynthetic;
  } else if (kind == "label_partition") {
    d.kind = DatasetSpec::Kind::kLabelPartition;
  } else if (kind == "file") {
    d.kind = DatasetSpec::Kind::kFile;
  } else {
    throw SchemaError("dataset.kind must be synthetic, label_partition or file");
  }
  read(obj, "alpha", w, d.alpha);
  read(obj, "beta", w, d.beta);
  read(obj, "count_mean", w, d.counts.mean);
  read(obj, "count_std", w, d.counts.stddev);
  read(obj, "min_count", w, d.counts.min_count);
  read(obj, "labels_per_client", w, d.labels_per_client);
  read(obj, "samples_per_client", w, d.samples_per_client);
  read(obj, "pool_size", w, d.pool_size);
  read(obj, "path", w, d.path);
}

void parse_training(const json& obj, TrainingConfig& t) {
  const std::string w = "training";
  reject_unknown(obj, w, {"batch_size", "eta0", "schedule", "decay", "l2", "target_loss", "max_rounds"});
  read(obj, "batch_size", w, t.batch_size);
  read(obj, "eta0", w, t.eta0);
  std::string schedule = t.schedule == LrSchedule::kInverseRound ? "inverse_round" : "exponential";
  read(obj, "schedule", w, schedule);
  if (schedule == "inverse_round") {
    t.schedule = LrSchedule::kInverseRound;
  } else if (schedule == "exponential") {
    t.schedule = LrSchedule::kExponential;
  } else {
    throw SchemaError("training.schedule must be inverse_round or exponential");
  }
  read(obj, "decay", w, t.decay);
  read(obj, "l2", w, t.l2);
  read(obj, "target_loss", w, t.target_loss);
  read(obj, "max_rounds", w, t.max_rounds);
}

void parse_estimation(const json& obj, EstimationSpec& e) {
  const std::string w = "estimation";
  reject_unknown(obj, w, {"probes", "f_a", "f_b", "max_rounds", "rho", "planted"});
  if (obj.contains("probes")) {
    if (!obj["probes"].is_array()) throw SchemaError("estimation.probes must be an array");
    e.probes.clear();
    for (std::size_t i = 0; i < obj["probes"].size(); ++i) {
      e.probes.push_back(parse_point(obj["probes"][i], w + ".probes[" + std::to_string(i) + "]"));
    }
  }
  read(obj, "f_a", w, e.f_a);
  read(obj, "f_b", w, e.f_b);
  read(obj, "max_rounds", w, e.max_rounds);
  if (obj.contains("rho") && !obj["rho"].is_null()) e.rho = require_number(obj["rho"], w + ".rho");
  if (obj.contains("planted") && !obj["planted"].is_null()) {
    const auto& p = obj["planted"];
    reject_unknown(p, w + ".planted", {"a0", "b0", "d", "f_star"});
    PlantedBound b;
    read(p, "a0", w + ".planted", b.a0);
    read(p, "b0", w + ".planted", b.b0);
    read(p, "d", w + ".planted", b.d);
    read(p, "f_star", w + ".planted", b.f_star);
    e.planted = b;
  }
}

void parse_optimizer(const json& obj, OptimizerSpec& o) {
  const std::string w = "optimizer";
  reject_unknown(obj, w, {"eps0", "max_iters", "init", "k_range", "e_range"});
  read(obj, "eps0", w, o.eps0);
  read(obj, "max_iters", w, o.max_iters);
  if (obj.contains("init") && !obj["init"].is_null()) {
    const auto& v = obj["init"];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw SchemaError("optimizer.init must be a [K, E] pair");
    }
    o.init = std::pair<double, double>{v[0].get<double>(), v[1].get<double>()};
  }
  if (obj.contains("k_range") && !obj["k_range"].is_null()) o.k_range = parse_range(obj["k_range"], w + ".k_range");
  if (obj.contains("e_range")) o.e_range = parse_range(obj["e_range"], w + ".e_range");
}

void parse_sweep(const json& obj, SweepSpec& s) {
  const std::string w = "sweep";
  reject_unknown(obj, w, {"k_values", "e_values", "seeds_per_cell"});
  read(obj, "k_values", w, s.k_values);
  read(obj, "e_values", w, s.e_values);
  read(obj, "seeds_per_cell", w, s.seeds_per_cell);
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw SchemaError(msg);
}

void check_point(int k, int e, int n, const std::string& where) {
  check(k >= 1 && k <= n, where + ": K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  check(e >= 1, where + ": E=" + std::to_string(e) + " must be >= 1");
}

// ---------------------------------------------------------------- outputs

std::filesystem::path prepare_output(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void write_json(const std::filesystem::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

std::string fmt(double v) { return io::format_number(v); }

void write_observations(std::ostream& out, const std::vector<RoundObservation>& obs) {
  io::write_row(out, {"k", "e", "rounds_fa", "rounds_fb", "seed"});
  for (const auto& o : obs) {
    io::write_row(out, {fmt(o.k), fmt(o.e), fmt(o.rounds_fa), fmt(o.rounds_fb), "0"});
  }
}

json cell_json(const CellStats& c, double gamma) {
  return {{"k", c.k},
          {"e", c.e},
          {"runs", c.runs},
          {"completed_runs", c.completed},
          {"mean_cost", c.mean_cost(gamma)},
          {"mean_rounds", c.mean_rounds},
          {"mean_time_s", c.mean_time},
          {"mean_energy_j", c.mean_energy}};
}

double resolve_rho(const ExperimentConfig& cfg, const FedSimulator* sim, std::ostream& out) {
  if (cfg.estimation.rho) return *cfg.estimation.rho;
  const auto est = run_estimate(cfg, sim);
  out << "estimated rho = " << fmt(est.report.ratio_rho) << " from "
      << est.report.pair_estimates.size() << " pairs\n";
  return est.report.ratio_rho;
}

}  // namespace

// ---------------------------------------------------------------- config

IntRange ExperimentConfig::k_range() const {
  return optimizer.k_range.value_or(IntRange{1, population.n});
}

void ExperimentConfig::validate(Command cmd) const {
  const int n = population.n;
  check(n >= 1, "population.n must be >= 1");
  check(population.profiles.empty() || static_cast<int>(population.profiles.size()) == n,
        "population.profiles must list exactly n devices");
  try {
    population.means.validate();
    for (const auto& p : population.profiles) p.validate();
    training.validate();
  } catch (const std::invalid_argument& ex) {
    throw SchemaError(ex.what());
  }
  check(population.rel_std >= 0.0 && std::isfinite(population.rel_std), "population.rel_std must be >= 0");

  switch (dataset.kind) {
    case DatasetSpec::Kind::kSynthetic:
      check(dataset.alpha >= 0.0 && dataset.beta >= 0.0, "dataset.alpha and beta must be >= 0");
      check(dataset.counts.mean > 0.0 && dataset.counts.stddev >= 0.0 && dataset.counts.min_count >= 1,
            "dataset counts need count_mean > 0, count_std >= 0, min_count >= 1");
      break;
    case DatasetSpec::Kind::kLabelPartition:
      check(dataset.labels_per_client >= 1 && dataset.labels_per_client <= kNumClasses,
            "dataset.labels_per_client must be in [1, 10]");
      check(dataset.samples_per_client >= dataset.labels_per_client,
            "dataset.samples_per_client must be >= labels_per_client");
      check(dataset.pool_size >= 1, "dataset.pool_size must be >= 1");
      break;
    case DatasetSpec::Kind::kFile:
      check(!dataset.path.empty(), "dataset.path is required for kind=file");
      break;
  }

  check(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  check(workers >= 1, "workers must be >= 1");

  const auto& est = estimation;
  check(est.f_b < est.f_a, "estimation.f_b must be below f_a");
  check(est.max_rounds >= 1, "estimation.max_rounds must be >= 1");
  check(!est.rho || (*est.rho > 0.0 && std::isfinite(*est.rho)), "estimation.rho must be > 0");
  for (std::size_t i = 0; i < est.probes.size(); ++i) {
    check_point(est.probes[i].first, est.probes[i].second, n, "estimation.probes[" + std::to_string(i) + "]");
  }
  if (est.planted) {
    check(est.planted->a0 > 0.0 && est.planted->b0 > 0.0 && est.planted->d >= 0.0,
          "estimation.planted needs a0 > 0, b0 > 0, d >= 0");
    check(est.f_b > est.planted->f_star, "estimation.planted.f_star must be below f_b");
  }
  const bool needs_estimate = cmd == Command::kEstimate || !est.rho;
  if (needs_estimate && cmd != Command::kSweep) {
    check(est.probes.size() >= 2, "estimation.probes needs at least two (K, E) pairs");
  }

  const auto& opt = optimizer;
  check(opt.eps0 > 0.0, "optimizer.eps0 must be > 0");
  check(opt.max_iters >= 1, "optimizer.max_iters must be >= 1");
  const IntRange kr = k_range();
  check(kr.lo >= 1 && kr.hi <= n && kr.lo <= kr.hi, "optimizer.k_range must lie within [1, n]");
  check(opt.e_range.lo >= 1 && opt.e_range.lo <= opt.e_range.hi, "optimizer.e_range must start at >= 1");
  if (opt.init) {
    check(opt.init->first >= 1.0 && opt.init->first <= n && opt.init->second >= 1.0,
          "optimizer.init must satisfy 1 <= K <= n and E >= 1");
  }

  if (cmd == Command::kSweep || cmd == Command::kTradeoff) {
    check(sweep.seeds_per_cell >= 1, "sweep.seeds_per_cell must be >= 1");
  }
  if (cmd == Command::kSweep) {
    check(!sweep.k_values.empty() && !sweep.e_values.empty(), "sweep grid must be non-empty");
    for (int k : sweep.k_values) check_point(k, 1, n, "sweep.k_values");
    for (int e : sweep.e_values) check_point(1, e, n, "sweep.e_values");
  }
  if (cmd == Command::kTradeoff) {
    check(!gammas.empty(), "gammas must be non-empty");
    for (double g : gammas) check(g >= 0.0 && g <= 1.0, "gammas entries must be in [0, 1]");
  }
  if (point) check_point(point->first, point->second, n, "point");
}

ExperimentConfig parse_config(const json& doc) {
  reject_unknown(doc, "config", {"population", "dataset", "training", "gamma", "gammas", "estimation",
                                 "optimizer", "sweep", "point", "seed", "output_dir", "workers"});
  ExperimentConfig cfg;
  if (doc.contains("population")) parse_population(doc["population"], cfg.population);
  if (doc.contains("dataset")) parse_dataset(doc["dataset"], cfg.dataset);
  if (doc.contains("training")) parse_training(doc["training"], cfg.training);
  read(doc, "gamma", "config", cfg.gamma);
  read(doc, "gammas", "config", cfg.gammas);
  if (doc.contains("estimation")) parse_estimation(doc["estimation"], cfg.estimation);
  if (doc.contains("optimizer")) parse_optimizer(doc["optimizer"], cfg.optimizer);
  if (doc.contains("sweep")) parse_sweep(doc["sweep"], cfg.sweep);
  if (doc.contains("point") && !doc["point"].is_null()) cfg.point = parse_point(doc["point"], "point");
  read(doc, "seed", "config", cfg.seed);
  read(doc, "output_dir", "config", cfg.output_dir);
  read(doc, "workers", "config", cfg.workers);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& ex) {
    throw SchemaError("config " + path + " is not valid JSON: " + ex.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json profiles = json::array();
  for (const auto& p : cfg.population.profiles) profiles.push_back(profile_json(p));
  j["population"] = {{"n", cfg.population.n},
                     {"means", profile_json(cfg.population.means)},
                     {"rel_std", cfg.population.rel_std},
                     {"profiles", profiles}};
  const auto& d = cfg.dataset;
  const char* kind = d.kind == DatasetSpec::Kind::kSynthetic        ? "synthetic"
                     : d.kind == DatasetSpec::Kind::kLabelPartition ? "label_partition"
                                                                    : "file";
  j["dataset"] = {{"kind", kind},
                  {"alpha", d.alpha},
                  {"beta", d.beta},
                  {"count_mean", d.counts.mean},
                  {"count_std", d.counts.stddev},
                  {"min_count", d.counts.min_count},
                  {"labels_per_client", d.labels_per_client},
                  {"samples_per_client", d.samples_per_client},
                  {"pool_size", d.pool_size},
                  {"path", d.path}};
  const auto& t = cfg.training;
  j["training"] = {{"batch_size", t.batch_size},
                   {"eta0", t.eta0},
                   {"schedule", t.schedule == LrSchedule::kInverseRound ? "inverse_round" : "exponential"},
                   {"decay", t.decay},
                   {"l2", t.l2},
                   {"target_loss", t.target_loss},
                   {"max_rounds", t.max_rounds}};
  j["gamma"] = cfg.gamma;
  j["gammas"] = cfg.gammas;
  json probes = json::array();
  for (const auto& [k, e] : cfg.estimation.probes) probes.push_back({k, e});
  j["estimation"] = {{"probes", probes},
                     {"f_a", cfg.estimation.f_a},
                     {"f_b", cfg.estimation.f_b},
                     {"max_rounds", cfg.estimation.max_rounds},
                     {"rho", cfg.estimation.rho ? json(*cfg.estimation.rho) : json(nullptr)}};
  if (const auto& p = cfg.estimation.planted) {
    j["estimation"]["planted"] = {{"a0", p->a0}, {"b0", p->b0}, {"d", p->d}, {"f_star", p->f_star}};
  }
  const IntRange kr = cfg.k_range();
  j["optimizer"] = {{"eps0", cfg.optimizer.eps0},
                    {"max_iters", cfg.optimizer.max_iters},
                    {"k_range", {kr.lo, kr.hi}},
                    {"e_range", {cfg.optimizer.e_range.lo, cfg.optimizer.e_range.hi}}};
  if (cfg.optimizer.init) j["optimizer"]["init"] = {cfg.optimizer.init->first, cfg.optimizer.init->second};
  j["sweep"] = {{"k_values", cfg.sweep.k_values},
                {"e_values", cfg.sweep.e_values},
                {"seeds_per_cell", cfg.sweep.seeds_per_cell}};
  if (cfg.point) j["point"] = {cfg.point->first, cfg.point->second};
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  return j;
}

// ---------------------------------------------------------------- building

namespace {

SyntheticDataset build_dataset(const ExperimentConfig& cfg) {
  const RngSeed data_seed{cfg.seed, "data"};
  const auto& d = cfg.dataset;
  switch (d.kind) {
    case DatasetSpec::Kind::kSynthetic:
      return generate_synthetic(d.alpha, d.beta, cfg.population.n, d.counts, data_seed);
    case DatasetSpec::Kind::kLabelPartition: {
      const CountDistribution one{static_cast<double>(d.pool_size), 0.0, d.pool_size};
      const auto pool = generate_synthetic(0.0, 0.0, 1, one, data_seed.derive("pool"));
      return partition_by_label(d.labels_per_client, d.samples_per_client, pool.clients.front(),
                                cfg.population.n, data_seed.derive("partition"));
    }
    case DatasetSpec::Kind::kFile: {
      std::ifstream f(d.path);
      if (!f) throw SchemaError("cannot open dataset " + d.path);
      auto ds = io::read_dataset(f);
      if (ds.num_clients() != cfg.population.n) {
        throw SchemaError("dataset has " + std::to_string(ds.num_clients()) + " clients, population.n is " +
                          std::to_string(cfg.population.n));
      }
      return ds;
    }
  }
  throw SchemaError("unknown dataset kind");
}

std::vector<DeviceProfile> build_profiles(const ExperimentConfig& cfg) {
  if (!cfg.population.profiles.empty()) return cfg.population.profiles;
  return draw_device_profiles(cfg.population.n, cfg.population.means, cfg.population.rel_std,
                              RngSeed{cfg.seed, "costs"});
}

}  // namespace

FedSimulator build_simulator(const ExperimentConfig& cfg) {
  auto data = build_dataset(cfg);
  const auto profiles = build_profiles(cfg);
  const auto counts = data.sample_counts();
  auto pop = build_population(profiles, counts);
  return FedSimulator(std::move(pop), std::move(data), cfg.training);
}

Population build_population_only(const ExperimentConfig& cfg) {
  const auto profiles = build_profiles(cfg);
  std::vector<std::int64_t> counts;
  const auto& d = cfg.dataset;
  if (d.kind == DatasetSpec::Kind::kSynthetic) {
    Engine eng = make_engine(RngSeed{cfg.seed, "data"}.derive("counts"));
    counts = draw_sample_counts(cfg.population.n, d.counts, eng);
  } else if (d.kind == DatasetSpec::Kind::kLabelPartition) {
    counts.assign(static_cast<std::size_t>(cfg.population.n), d.samples_per_client);
  } else {
    counts = build_dataset(cfg).sample_counts();
  }
  return build_population(profiles, counts);
}

RngSeed run_seed(const ExperimentConfig& cfg, int replicate) {
  return RngSeed{cfg.seed, "run"}.derive(static_cast<std::uint64_t>(replicate));
}

// ---------------------------------------------------------------- pipelines

EstimateResult run_estimate(const ExperimentConfig& cfg, const FedSimulator* sim) {
  const auto& spec = cfg.estimation;
  const int n = cfg.population.n;
  EstimateResult res;
  if (spec.planted) {
    const auto& p = *spec.planted;
    for (const auto& [k, e] : spec.probes) {
      const double core = p.a0 + p.b0 * (1.0 + participation_penalty(k, n)) * e * e;
      res.observations.push_back({static_cast<double>(k), static_cast<double>(e),
                                  p.d + core / (e * (spec.f_a - p.f_star)),
                                  p.d + core / (e * (spec.f_b - p.f_star))});
    }
    res.report = estimate_ratio(std::span<const RoundObservation>(res.observations), n);
    return res;
  }
  if (sim == nullptr) throw std::invalid_argument("trained estimation needs a simulator");

  const int m = static_cast<int>(spec.probes.size());
  std::vector<std::optional<EstimationSample>> out(static_cast<std::size_t>(m));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
  const RngSeed base{cfg.seed, "probe"};
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.workers) if (cfg.workers > 1)
  for (int i = 0; i < m; ++i) {
    const auto [k, e] = spec.probes[static_cast<std::size_t>(i)];
    try {
      out[static_cast<std::size_t>(i)] =
          probe_pair(*sim, k, e, spec.f_a, spec.f_b, spec.max_rounds, base.derive(static_cast<std::uint64_t>(i)));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& ex : errors) {
    if (ex) std::rethrow_exception(ex);
  }
  for (auto& s : out) res.samples.push_back(*s);
  res.report = estimate_ratio(std::span<const EstimationSample>(res.samples), n);
  return res;
}

OptimizeResult run_optimize(const ExperimentConfig& cfg, const Population& pop, double gamma,
                            double rho) {
  const auto problem = P3Problem::from(pop, CostWeights(gamma), rho);
  const ControlPoint init = cfg.optimizer.init
                                ? ControlPoint{cfg.optimizer.init->first, cfg.optimizer.init->second, {}}
                                : default_acs_start(pop.size());
  auto trace = acs_optimize(problem, init, AcsOptions{cfg.optimizer.eps0, cfg.optimizer.max_iters});
  return {problem, std::move(trace)};
}

std::vector<CellStats> evaluate_cells(const ExperimentConfig& cfg, const FedSimulator& sim,
                                      const std::vector<std::pair<int, int>>& cells, int replicates) {
  struct Outcome {
    bool complete = false;
    double rounds = 0.0, time = 0.0, energy = 0.0;
  };
  const int jobs = static_cast<int>(cells.size()) * replicates;
  std::vector<Outcome> outcomes(static_cast<std::size_t>(jobs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.workers) if (cfg.workers > 1)
  for (int j = 0; j < jobs; ++j) {
    const auto [k, e] = cells[static_cast<std::size_t>(j / replicates)];
    try {
      const auto rec = sim.run(k, e, run_seed(cfg, j % replicates));
      outcomes[static_cast<std::size_t>(j)] = {rec.complete, static_cast<double>(rec.rounds_executed()),
                                               rec.total_time(), rec.total_energy()};
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const auto& ex : errors) {
    if (ex) std::rethrow_exception(ex);
  }

  std::vector<CellStats> stats;
  stats.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellStats s{cells[c].first, cells[c].second, replicates, 0, 0.0, 0.0, 0.0};
    for (int r = 0; r < replicates; ++r) {
      const auto& o = outcomes[c * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r)];
      if (!o.complete) continue;
      ++s.completed;
      s.mean_rounds += o.rounds;
      s.mean_time += o.time;
      s.mean_energy += o.energy;
    }
    if (s.completed > 0) {
      s.mean_rounds /= s.completed;
      s.mean_time /= s.completed;
      s.mean_energy /= s.completed;
    }
    stats.push_back(s);
  }
  return stats;
}

std::optional<std::size_t> empirical_argmin(const std::vector<CellStats>& cells, double gamma) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].complete()) continue;
    if (!best || cells[i].mean_cost(gamma) < cells[*best].mean_cost(gamma)) best = i;
  }
  return best;
}

std::vector<TradeoffRow> run_tradeoff(const ExperimentConfig& cfg, const FedSimulator& sim,
                                      double rho) {
  std::vector<TradeoffRow> rows;
  std::vector<std::pair<int, int>> unique;
  for (double g : cfg.gammas) {
    TradeoffRow row;
    row.gamma = g;
    try {
      const auto opt = run_optimize(cfg, sim.population(), g, rho);
      row.point = opt.trace.final_integer_point;
      row.converged = opt.trace.converged;
      const std::pair<int, int> p{static_cast<int>(row.point->k), static_cast<int>(row.point->e)};
      if (std::find(unique.begin(), unique.end(), p) == unique.end()) unique.push_back(p);
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    rows.push_back(std::move(row));
  }
  const auto stats = evaluate_cells(cfg, sim, unique, cfg.sweep.seeds_per_cell);
  for (auto& row : rows) {
    if (!row.point) continue;
    const std::pair<int, int> p{static_cast<int>(row.point->k), static_cast<int>(row.point->e)};
    const auto idx = static_cast<std::size_t>(std::find(unique.begin(), unique.end(), p) - unique.begin());
    row.stats = stats[idx];
    if (!row.stats->complete()) {
      row.error = "target loss not reached in " + std::to_string(row.stats->runs - row.stats->completed) +
                  " of " + std::to_string(row.stats->runs) + " runs";
    }
  }
  return rows;
}

// ---------------------------------------------------------------- commands

int cmd_estimate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto dir = prepare_output(cfg);
  std::optional<FedSimulator> sim;
  if (!cfg.estimation.planted) sim.emplace(build_simulator(cfg));
  EstimateResult res;
  try {
    res = run_estimate(cfg, sim ? &*sim : nullptr);
  } catch (const UnreachableLossError& ex) {
    out << "error: " << ex.what() << '\n';
    return kExitUnreachable;
  }
  {
    auto f = open_out(dir / "samples.csv");
    if (cfg.estimation.planted) {
      write_observations(f, res.observations);
    } else {
      io::write_samples(f, res.samples);
    }
  }
  if (opts.json) write_json(dir / "estimate.json", io::to_json(res.report, res.samples));
  out << "rho = " << fmt(res.report.ratio_rho) << '\n'
      << "pairs used = " << res.report.pair_estimates.size() << ", discarded = " << res.report.discarded_pairs
      << '\n'
      << "overhead_iterations = " << res.report.overhead_iterations << '\n';
  return kExitOk;
}

int cmd_optimize(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto dir = prepare_output(cfg);
  double rho = 0.0;
  std::optional<Population> pop;
  try {
    if (cfg.estimation.rho || cfg.estimation.planted) {
      pop.emplace(build_population_only(cfg));
      rho = cfg.estimation.rho ? *cfg.estimation.rho : run_estimate(cfg, nullptr).report.ratio_rho;
    } else {
      const auto sim = build_simulator(cfg);
      rho = resolve_rho(cfg, &sim, out);
      pop.emplace(sim.population());
    }
  } catch (const UnreachableLossError& ex) {
    out << "error: " << ex.what() << '\n';
    return kExitUnreachable;
  }
  const auto res = run_optimize(cfg, *pop, cfg.gamma, rho);
  {
    auto f = open_out(dir / "trace.csv");
    io::write_trace(f, res.trace, res.problem);
  }
  const auto& z = res.trace.final_integer_point;
  const auto grid = grid_search_p3(*pop, CostWeights(cfg.gamma), rho, pop->size(), cfg.k_range(),
                                   cfg.optimizer.e_range);
  if (opts.json) {
    json j = io::to_json(res.trace, res.problem);
    j["gamma"] = cfg.gamma;
    j["rho"] = rho;
    j["grid_argmin"] = {{"k", grid.k}, {"e", grid.e}};
    write_json(dir / "optimize.json", j);
  }
  out << "rho = " << fmt(rho) << ", gamma = " << fmt(cfg.gamma) << '\n'
      << "K* = " << fmt(z.k) << ", E* = " << fmt(z.e) << '\n'
      << "grid argmin K = " << fmt(grid.k) << ", E = " << fmt(grid.e) << '\n'
      << "iterations = " << (res.trace.iterates.size() - 1)
      << (res.trace.converged ? "" : " (not converged)") << '\n';
  return res.trace.converged ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto dir = prepare_output(cfg);
  const auto sim = build_simulator(cfg);
  std::pair<int, int> point;
  if (cfg.point) {
    point = *cfg.point;
  } else {
    double rho = 0.0;
    try {
      rho = resolve_rho(cfg, &sim, out);
    } catch (const UnreachableLossError& ex) {
      out << "error: " << ex.what() << '\n';
      return kExitUnreachable;
    }
    const auto z = run_optimize(cfg, sim.population(), cfg.gamma, rho).trace.final_integer_point;
    point = {static_cast<int>(z.k), static_cast<int>(z.e)};
  }
  const auto rec = sim.run(point.first, point.second, run_seed(cfg, 0));
  {
    auto f = open_out(dir / "run.csv");
    io::write_run(f, rec);
  }
  if (opts.json) write_json(dir / "run.json", io::to_json(rec));
  out << "K = " << point.first << ", E = " << point.second << '\n'
      << "rounds = " << rec.rounds_executed() << (rec.complete ? "" : " (target not reached)") << '\n'
      << "total_time_s = " << fmt(rec.total_time()) << ", total_energy_j = " << fmt(rec.total_energy())
      << '\n';
  if (rec.complete) {
    out << "cost = " << fmt(measure_cost_to_target(rec, CostWeights(cfg.gamma)).weighted_total) << '\n';
  }
  return rec.complete ? kExitOk : kExitUnreachable;
}

int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto dir = prepare_output(cfg);
  const auto sim = build_simulator(cfg);
  std::vector<std::pair<int, int>> cells;
  for (int k : cfg.sweep.k_values) {
    for (int e : cfg.sweep.e_values) cells.emplace_back(k, e);
  }
  const auto stats = evaluate_cells(cfg, sim, cells, cfg.sweep.seeds_per_cell);
  const auto best = empirical_argmin(stats, cfg.gamma);
  {
    auto f = open_out(dir / "sweep.csv");
    io::write_row(f, {"k", "e", "mean_cost", "mean_rounds", "mean_time_s", "mean_energy_j",
                      "completed_runs", "incomplete", "argmin"});
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& c = stats[i];
      io::write_row(f, {std::to_string(c.k), std::to_string(c.e), fmt(c.mean_cost(cfg.gamma)),
                        fmt(c.mean_rounds), fmt(c.mean_time), fmt(c.mean_energy),
                        std::to_string(c.completed), c.complete() ? "0" : "1",
                        best && *best == i ? "1" : "0"});
    }
  }
  if (opts.json) {
    json rows = json::array();
    for (const auto& c : stats) rows.push_back(cell_json(c, cfg.gamma));
    write_json(dir / "sweep.json",
               {{"gamma", cfg.gamma}, {"cells", rows}, {"argmin", best ? json(*best) : json(nullptr)}});
  }
  if (!best) {
    out << "no cell reached the target loss in every run\n";
    return kExitUnreachable;
  }
  const auto& b = stats[*best];
  out << "empirical optimum K = " << b.k << ", E = " << b.e << ", mean cost = " << fmt(b.mean_cost(cfg.gamma))
      << '\n';
  return kExitOk;
}

int cmd_tradeoff(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& out) {
  const auto dir = prepare_output(cfg);
  const auto sim = build_simulator(cfg);
  double rho = 0.0;
  try {
    rho = resolve_rho(cfg, &sim, out);
  } catch (const UnreachableLossError& ex) {
    out << "error: " << ex.what() << '\n';
    return kExitUnreachable;
  }
  const auto rows = run_tradeoff(cfg, sim, rho);
  bool unreachable = false, nonconverged = false;
  {
    auto f = open_out(dir / "tradeoff.csv");
    io::write_row(f, {"gamma", "k_star", "e_star", "mean_time_s", "mean_energy_j", "mean_cost",
                      "completed_runs", "converged", "status"});
    for (const auto& r : rows) {
      const bool ok = r.error.empty();
      unreachable = unreachable || !ok;
      nonconverged = nonconverged || (r.point && !r.converged);
      const auto* s = r.stats ? &*r.stats : nullptr;
      io::write_row(f, {fmt(r.gamma), r.point ? fmt(r.point->k) : "", r.point ? fmt(r.point->e) : "",
                        s ? fmt(s->mean_time) : "", s ? fmt(s->mean_energy) : "",
                        s ? fmt(s->mean_cost(r.gamma)) : "", s ? std::to_string(s->completed) : "0",
                        r.converged ? "1" : "0", ok ? "ok" : "failed"});
    }
  }
  if (opts.json) {
    json arr = json::array();
    for (const auto& r : rows) {
      json j{{"gamma", r.gamma}, {"converged", r.converged}, {"error", r.error}};
      if (r.point) j["point"] = {{"k", r.point->k}, {"e", r.point->e}};
      if (r.stats) j["stats"] = cell_json(*r.stats, r.gamma);
      arr.push_back(j);
    }
    write_json(dir / "tradeoff.json", {{"rho", rho}, {"rows", arr}});
  }
  for (const auto& r : rows) {
    out << "gamma = " << fmt(r.gamma);
    if (r.point) out << ": K* = " << fmt(r.point->k) << ", E* = " << fmt(r.point->e);
    if (r.stats && r.stats->completed > 0) {
      out << ", time = " << fmt(r.stats->mean_time) << " s, energy = " << fmt(r.stats->mean_energy) << " J";
    }
    if (!r.error.empty()) out << " [" << r.error << "]";
    out << '\n';
  }
  if (unreachable) return kExitUnreachable;
  return nonconverged ? kExitNonConvergence : kExitOk;
}

int run_command(Command cmd, const ExperimentConfig& cfg, const CommandOptions& opts,
                std::ostream& out, std::ostream& err) {
  try {
    cfg.validate(cmd);
    switch (cmd) {
      case Command::kEstimate:
        return cmd_estimate(cfg, opts, out);
      case Command::kOptimize:
        return cmd_optimize(cfg, opts, out);
      case Command::kSimulate:
        return cmd_simulate(cfg, opts, out);
      case Command::kSweep:
        return cmd_sweep(cfg, opts, out);
      case Command::kTradeoff:
        return cmd_tradeoff(cfg, opts, out);
    }
  } catch (const SchemaError& ex) {
    err << "schema error: " << ex.what() << '\n';
    return kExitSchema;
  } catch (const UnreachableLossError& ex) {
    err << "unreachable loss: " << ex.what() << '\n';
    return kExitUnreachable;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace costfl::harness
