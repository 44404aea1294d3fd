#pragma once

// Runs every enabled check over a finished trace and condenses the trace into
// a flat summary used by run.json, sweep rows and refinement tables.

#include "krf/config.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace krf {

/// One report per enabled check; per-companion and per-window checks carry a
/// suffix (heat_kernel:<label>, moser:<label>, supersolution:T=<T>). A check
/// that throws becomes an Inconclusive report carrying the message.
std::vector<LemmaReport> run_suite(const Trace& trace, const SuiteConfig& cfg);

/// First time the record field drops to threshold, log-linearly interpolated
/// between samples.
std::optional<double> hitting_time(const Trace& trace, RecordField field, double threshold);

/// Scalar summary of a trace: final values, rates, lengths, hitting time.
std::map<std::string, double> summarize(const Trace& trace);

/// Flattens report constants and residuals into "<id>.<key>" entries.
std::map<std::string, double> flatten(const std::vector<LemmaReport>& reports);

}  // namespace krf
