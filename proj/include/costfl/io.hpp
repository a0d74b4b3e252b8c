#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "costfl/bound_estimator.hpp"
#include "costfl/fl_sim.hpp"
#include "costfl/optimizer.hpp"

namespace costfl::io {

/// Shortest text that parses back to the same double ("%.17g" trimmed).
std::string format_number(double v);

/// Comma-joined cells followed by '\n'. Cells must not contain commas.
void write_row(std::ostream& out, const std::vector<std::string>& cells);

/// Splits one CSV line on commas; no quoting support.
std::vector<std::string> split_row(const std::string& line);

/// Rows: client_id, label, x0..x59.
void write_dataset(std::ostream& out, const SyntheticDataset& data);
/// Clients must appear with contiguous ids starting at 0.
SyntheticDataset read_dataset(std::istream& in);

/// Per-round rows: round, loss, round_time_s, round_energy_j,
/// cumulative_time_s, cumulative_energy_j, sampled (space separated ids).
void write_run(std::ostream& out, const FedRunRecord& record);

/// Rows: k, e, rounds_fa, rounds_fb, seed.
void write_samples(std::ostream& out, const std::vector<EstimationSample>& samples);
std::vector<EstimationSample> read_samples(std::istream& in);

/// Rows: iteration, k, e, objective (relative P3 value at the iterate).
void write_trace(std::ostream& out, const AcsTrace& trace, const P3Problem& problem);

nlohmann::json to_json(const FedRunRecord& record);
nlohmann::json to_json(const EstimationReport& report, const std::vector<EstimationSample>& samples);
nlohmann::json to_json(const AcsTrace& trace, const P3Problem& problem);

}  // namespace costfl::io
