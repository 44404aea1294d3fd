#pragma once

// On-disk layout of one run directory:
//
//   trace.csv         t, l2_u_tilde, l2_grad_u_tilde, l2_lap_u_tilde, c0_u_tilde,
//                     c0_grad_u_tilde, c0_lap_u_tilde, c0_R_minus_n, a, b, min_R,
//                     c0_profile_dist  (fixed order, %.17g, schema kTraceSchemaVersion)
//   records.csv       every ObservableRecord field, used to reload the trace
//   checkpoints.json  grid metadata and full node arrays of phi and companions
//   run.json          config echo, hash, status, trace metadata, summary,
//                     lengths and every LemmaReport
//   timing.json       wall-clock only, so the other files are bit-identical
//                     across reruns
//   verify.json       written by verify

#include "krf/config.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace krf {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kRunSchemaVersion = 1;

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& trace_columns();

void write_trace_csv(const std::filesystem::path& path, const Trace& trace);
void write_records_csv(const std::filesystem::path& path, const Trace& trace);
void write_checkpoints(const std::filesystem::path& path, const Trace& trace);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json run_json(const ExperimentConfig& cfg, const Trace& trace,
                        const std::vector<LemmaReport>& reports);

/// Writes every run artifact into dir (created if needed).
void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg, const Trace& trace,
               const std::vector<LemmaReport>& reports, double wall_seconds);

struct LoadedRun {
  ExperimentConfig config;
  Trace trace;
  nlohmann::json run;
};

/// Rebuilds config and trace from a run directory; throws ArtifactError.
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace krf
