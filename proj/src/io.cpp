#include "costfl/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace costfl::io {

namespace {

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::int64_t parse_int(const std::string& s, const char* what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad integer in column ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument(std::string("bad integer in column ") + what);
  return v;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad number in column ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument(std::string("bad number in column ") + what);
  return v;
}

bool read_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_dataset(std::ostream& out, const SyntheticDataset& data) {
  std::vector<std::string> header{"client_id", "label"};
  for (int j = 0; j < kFeatureDim; ++j) header.push_back("x" + std::to_string(j));
  write_row(out, header);
  std::vector<std::string> cells(static_cast<std::size_t>(kFeatureDim + 2));
  for (int c = 0; c < data.num_clients(); ++c) {
    const auto& cd = data.clients[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < cd.size(); ++i) {
      cells[0] = std::to_string(c);
      cells[1] = std::to_string(cd.labels[i]);
      const auto x = cd.row(i);
      for (int j = 0; j < kFeatureDim; ++j) {
        cells[static_cast<std::size_t>(j + 2)] = format_number(x[static_cast<std::size_t>(j)]);
      }
      write_row(out, cells);
    }
  }
}

SyntheticDataset read_dataset(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw std::invalid_argument("dataset file is empty");
  if (split_row(line).size() != static_cast<std::size_t>(kFeatureDim + 2)) {
    throw std::invalid_argument("dataset header must have client_id, label and 60 features");
  }
  SyntheticDataset data;
  std::vector<double> x(static_cast<std::size_t>(kFeatureDim));
  while (read_line(in, line)) {
    const auto cells = split_row(line);
    if (cells.size() != static_cast<std::size_t>(kFeatureDim + 2)) {
      throw std::invalid_argument("dataset row has " + std::to_string(cells.size()) + " columns");
    }
    const auto id = parse_int(cells[0], "client_id");
    const auto label = parse_int(cells[1], "label");
    if (id == data.num_clients()) data.clients.emplace_back();
    if (id != data.num_clients() - 1) throw std::invalid_argument("client ids must be contiguous from 0");
    for (int j = 0; j < kFeatureDim; ++j) {
      x[static_cast<std::size_t>(j)] = parse_double(cells[static_cast<std::size_t>(j + 2)], "feature");
    }
    data.clients.back().push(x, static_cast<int>(label));
  }
  data.validate();
  return data;
}

void write_run(std::ostream& out, const FedRunRecord& record) {
  write_row(out, {"round", "loss", "round_time_s", "round_energy_j", "cumulative_time_s",
                  "cumulative_energy_j", "sampled"});
  for (const auto& r : record.rounds) {
    write_row(out, {fmt_int(r.round), format_number(r.loss), format_number(r.round_time),
                    format_number(r.round_energy), format_number(r.cumulative_time),
                    format_number(r.cumulative_energy), join_ids(r.sampled)});
  }
}

void write_samples(std::ostream& out, const std::vector<EstimationSample>& samples) {
  write_row(out, {"k", "e", "rounds_fa", "rounds_fb", "seed"});
  for (const auto& s : samples) {
    write_row(out, {fmt_int(s.k), fmt_int(s.e), fmt_int(s.rounds_fa), fmt_int(s.rounds_fb),
                    std::to_string(s.seed)});
  }
}

std::vector<EstimationSample> read_samples(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw std::invalid_argument("samples file is empty");
  if (split_row(line) != std::vector<std::string>{"k", "e", "rounds_fa", "rounds_fb", "seed"}) {
    throw std::invalid_argument("samples header must be k,e,rounds_fa,rounds_fb,seed");
  }
  std::vector<EstimationSample> out;
  while (read_line(in, line)) {
    const auto c = split_row(line);
    if (c.size() != 5) throw std::invalid_argument("samples row needs 5 columns");
    EstimationSample s{static_cast<int>(parse_int(c[0], "k")), static_cast<int>(parse_int(c[1], "e")),
                       parse_int(c[2], "rounds_fa"), parse_int(c[3], "rounds_fb"),
                       std::stoull(c[4])};
    s.validate();
    out.push_back(s);
  }
  return out;
}

void write_trace(std::ostream& out, const AcsTrace& trace, const P3Problem& problem) {
  write_row(out, {"iteration", "k", "e", "objective"});
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
    const auto& z = trace.iterates[i];
    write_row(out, {std::to_string(i), format_number(z.k), format_number(z.e),
                    format_number(problem.objective(z.k, z.e))});
  }
}

nlohmann::json to_json(const FedRunRecord& record) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : record.rounds) {
    rounds.push_back({{"round", r.round},
                      {"loss", r.loss},
                      {"round_time_s", r.round_time},
                      {"round_energy_j", r.round_energy},
                      {"cumulative_time_s", r.cumulative_time},
                      {"cumulative_energy_j", r.cumulative_energy},
                      {"sampled", r.sampled}});
  }
  return {{"k", record.k},
          {"e", record.e},
          {"initial_loss", record.initial_loss},
          {"target_loss", record.target_loss},
          {"complete", record.complete},
          {"rounds_executed", record.rounds_executed()},
          {"total_time_s", record.total_time()},
          {"total_energy_j", record.total_energy()},
          {"rounds", rounds}};
}

nlohmann::json to_json(const EstimationReport& report, const std::vector<EstimationSample>& samples) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    rows.push_back({{"k", s.k}, {"e", s.e}, {"rounds_fa", s.rounds_fa}, {"rounds_fb", s.rounds_fb},
                    {"seed", s.seed}});
  }
  return {{"ratio_rho", report.ratio_rho},
          {"pair_estimates", report.pair_estimates},
          {"discarded_pairs", report.discarded_pairs},
          {"overhead_iterations", report.overhead_iterations},
          {"samples", rows}};
}

nlohmann::json to_json(const AcsTrace& trace, const P3Problem& problem) {
  nlohmann::json its = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.iterates.size(); ++i) {
    const auto& z = trace.iterates[i];
    its.push_back({{"iteration", i}, {"k", z.k}, {"e", z.e}, {"objective", problem.objective(z.k, z.e)}});
  }
  return {{"converged", trace.converged},
          {"k_star", trace.final_integer_point.k},
          {"e_star", trace.final_integer_point.e},
          {"objective", trace.objective_at_final},
          {"iterates", its}};
}

}  // namespace costfl::io
