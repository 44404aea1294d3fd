#pragma once

// Experiment configuration: JSON text -> validated ExperimentConfig.
//
// Schema (every key optional unless noted; unknown keys are rejected):
//
//   schema_version   1
//   grid             { N: int in [8, 1024], filter: bool }
//   step             { dt_rule: "fixed" | "cfl", dt, safety, filter: bool,
//                      repin: bool, cadence, checkpoint_cadence,
//                      stencil_halfwidth }
//   initial          { family: "round" | "beta" | "chebyshev",
//                      beta,                          (beta)
//                      coefficients: [c0, c1, ...],   (chebyshev, explicit)
//                      modes, amplitude, parity: "any" | "even" | "odd",
//                      seed }                         (chebyshev, sampled)
//   t_max            number >= 0
//   companions       [ { label, kind: "constant" | "linear" | "bump",
//                        slope, center, width } ]
//   verification     { checks: [ids], supersolution_T: [..], moser_T,
//                      residual_tol, round_tol, residual_t_begin,
//                      supersolution_tol, refinement_tol, denominator_floor,
//                      numerator_floor, D_grad, D_lap, D_smooth, delta_small,
//                      eps_max, eps_grid: [..], logsobolev_tol, min_r_tol,
//                      moser_margin, window_end, split_time }
//   output           directory, relative to the output root

#include "krf/flow.hpp"
#include "krf/lemmas.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace krf {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& origin, int line, int column, const std::string& what)
      : std::runtime_error(origin + ":" + std::to_string(line) + ":" + std::to_string(column) +
                           ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct InitialData {
  std::string family = "beta";
  double beta = 0.1;
  std::vector<double> coefficients;  // explicit chebyshev coefficients
  int modes = 4;                     // sampled chebyshev
  double amplitude = 0.05;
  std::string parity = "any";
  std::optional<std::uint64_t> seed;
};

struct CompanionSpec {
  std::string label;
  std::string kind = "constant";
  double slope = 1.0;
  double center = 0.0;
  double width = 0.1;
};

struct SuiteConfig {
  VerificationConfig lemmas;
  std::set<std::string> checks;  // empty: every check
  std::vector<double> supersolution_T{0.0, 1.0};
  double moser_T = 1.0;

  bool enabled(const std::string& id) const { return checks.empty() || checks.count(id) > 0; }
};

struct ExperimentConfig {
  int N = 48;
  bool grid_filter = false;
  StepPolicy policy;
  InitialData initial;
  double t_max = 20.0;
  std::vector<CompanionSpec> companions;
  SuiteConfig verification;
  std::string output = "run";
  std::string hash;  // FNV-1a 64 of the source bytes, hex
};

/// Every check id understood by the suite.
const std::vector<std::string>& known_checks();

/// Parses and validates; errors carry the line and column of the offending value.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON form; parse_config(to_json(c).dump()) reproduces c.
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string fnv1a_hex(const std::string& bytes);

/// Initial profile; throws InvalidProfile when it fails validation.
MetricProfile initial_profile(const ExperimentConfig& cfg);
std::vector<CompanionField> initial_companions(const ExperimentConfig& cfg, const Grid& grid);

}  // namespace krf
