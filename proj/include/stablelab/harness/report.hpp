#pragma once

// Report files: ensemble CSVs, a JSON summary and two-column plot data.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stablelab/harness/diagnostics.hpp"
#include "stablelab/harness/experiment.hpp"

namespace stablelab::harness {

/// `n,replica,value` rows, values printed with %.17g.
std::string ensemble_csv(const SumEnsemble& ensemble);

nlohmann::json summary_json(const ExperimentResult& result);
nlohmann::json tail_json(const TailFit& fit);

/// Writes ensemble_<route>.csv, fit_<route>.dat and summary.json into `dir`
/// (created if missing). A result without runs gets status "no-data".
/// Throws std::runtime_error when a file cannot be written.
void emit_report(const ExperimentResult& result, const std::string& dir);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& j);
/// Two whitespace-separated columns per line.
void write_columns(const std::string& path, const std::vector<std::pair<double, double>>& rows);

}  // namespace stablelab::harness
