#pragma once

// The five subcommands behind the krf tool. Each returns a process exit code
// and writes human-readable progress to out and diagnostics to err.

#include "krf/artifacts.hpp"
#include "krf/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace krf {

enum ExitCode : int {
  kExitOk = 0,         // success, possibly with warnings
  kExitUsage = 1,      // usage, config or missing-artifact error
  kExitAbort = 2,      // run ended early
  kExitViolation = 3,  // verify found a conclusion violation
};

/// $KRF_OUTPUT_ROOT if set, otherwise the working directory.
std::filesystem::path output_root();

struct Execution {
  Trace trace;
  std::vector<LemmaReport> reports;
  double wall_seconds = 0.0;
};

/// Builds the initial data, evolves and runs the enabled checks. Throws
/// InvalidProfile or ConfigError before any time step is taken.
Execution execute(const ExperimentConfig& cfg);

/// One axis of a sweep: a dotted config path and its values as JSON tokens.
struct SweepAxis {
  std::string path;
  std::vector<std::string> values;
};

/// Parses "path=v1,v2,..." (commas inside brackets do not split).
SweepAxis parse_axis(const std::string& spec);

/// Policy for refinement level k: stencil half-width halved k times and a
/// fixed dt halved until it meets the CFL bound and divides the stencil.
StepPolicy refine_policy(const ExperimentConfig& base, int N, int level);

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
};

int cmd_run(const std::string& config_path, const std::optional<std::filesystem::path>& out_dir,
            const CommandIo& io);
int cmd_verify(const std::filesystem::path& dir, const CommandIo& io);
int cmd_sweep(const std::string& template_path, const std::vector<std::string>& grid,
              unsigned jobs, const std::optional<std::filesystem::path>& out_dir,
              const CommandIo& io);
int cmd_refine(const std::string& config_path, const std::vector<int>& levels,
               const std::optional<std::filesystem::path>& out_dir, const CommandIo& io);
int cmd_report(const std::filesystem::path& dir, const CommandIo& io);

}  // namespace krf
