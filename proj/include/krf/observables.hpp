#pragma once

#include "krf/flow.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace krf {

/// Per-time values of every monitored norm. Norms are with respect to omega.
struct ObservableRecord {
  double t = 0.0;
  double l2_u_tilde = 0.0;
  double l2_grad_u_tilde = 0.0;
  double l2_lap_u_tilde = 0.0;
  double c0_u_tilde = 0.0;
  double c0_grad_u_tilde = 0.0;
  double c0_lap_u_tilde = 0.0;
  double c0_r_minus_n = 0.0;
  double a = 0.0;
  double b = 0.0;
  double min_r = 0.0;
  double l2_u = 0.0;
  double l2_lap_u = 0.0;
  double c0_profile_dist = 0.0;
  // Not part of the CSV schema; kept for the monitors.
  double l2_r_minus_n = 0.0;
  double c0_u = 0.0;
  double l1_u_tilde = 0.0;
};

ObservableRecord record(const FlowState& state);
ObservableRecord record(double t, const GeometrySnapshot& snapshot);

struct FieldSample {
  double t = 0.0;
  Field phi;
  std::vector<Field> companions;
};

/// Full fields at one checkpoint time plus the two samples at t -+ h used for
/// time derivatives (absent near the ends of the run).
struct Checkpoint {
  FieldSample center;
  std::optional<FieldSample> before;
  std::optional<FieldSample> after;
};

struct TraceMetadata {
  std::string config_hash;
  std::string dt_rule = "fixed";
  double dt = 1e-4;
  double cadence = 0.05;
  double checkpoint_cadence = 0.05;
  double stencil_halfwidth = 0.005;
  double t_max = 0.0;
  bool filter = false;
  bool repin = true;
  std::vector<std::string> companion_labels;
};

/// Records at a uniform cadence plus field checkpoints. Append-only.
class Trace {
 public:
  Trace(GridPtr grid, TraceMetadata meta) : grid_(std::move(grid)), meta_(std::move(meta)) {}

  const GridPtr& grid() const { return grid_; }
  const TraceMetadata& meta() const { return meta_; }
  const std::vector<ObservableRecord>& records() const { return records_; }
  const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }
  double cadence() const { return meta_.cadence; }

  /// Throws std::logic_error unless t lands on the next cadence slot.
  void append(const ObservableRecord& rec);
  void append(Checkpoint cp);

  bool complete() const { return complete_; }
  const std::string& abort_reason() const { return abort_reason_; }
  void mark_complete() { complete_ = true; }
  void mark_aborted(std::string reason) {
    complete_ = false;
    abort_reason_ = std::move(reason);
  }

  double t_end() const { return records_.empty() ? 0.0 : records_.back().t; }

  /// Exact sample lookup; nullptr if t is not a stored sample time.
  const ObservableRecord* record_at(double t) const;
  const Checkpoint* checkpoint_at(double t) const;
  std::optional<std::size_t> index_of(double t) const;

  MetricProfile profile(const FieldSample& s) const { return {grid_, s.phi}; }

 private:
  GridPtr grid_;
  TraceMetadata meta_;
  std::vector<ObservableRecord> records_;
  std::vector<Checkpoint> checkpoints_;
  bool complete_ = false;
  std::string abort_reason_;
};

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
};

/// Fit window expressed through the size of ||u_tilde||_{L2}.
struct WindowRule {
  double lo = 1e-8;
  double hi = 1e-3;
};

struct RateFit {
  bool ok = false;
  double rate = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the log-linear fit
  std::size_t samples = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::string note;
};

using RecordField = double ObservableRecord::*;

/// Least-squares slope of ln q against t.
RateFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& q);

/// Fit of ln(quantity) over the records where ||u_tilde||_{L2} lies in the rule.
RateFit rate_fit(const Trace& trace, RecordField quantity, const WindowRule& rule = {});

/// Trapezoidal integral of a record field over [window.begin, window.end].
/// stride > 1 integrates on every stride-th sample.
double integrate_records(const Trace& trace, RecordField quantity, const TimeWindow& window,
                         std::size_t stride = 1);

struct LengthReport {
  double mabuchi = 0.0;       // int ||u_tilde||_{L2} dt over the window
  double mabuchi_u = 0.0;     // same for the Gibbs-normalized u
  double calabi = 0.0;        // int ||Delta u_tilde||_{L2} dt
  double mabuchi_tail = 0.0;  // exponential tail beyond the window, reported separately
  double calabi_tail = 0.0;
  TimeWindow window;
  std::string quadrature = "trapezoid";
  double mabuchi_refinement_delta = 0.0;  // relative change against half the samples
  double calabi_refinement_delta = 0.0;
  bool partial = false;
};

LengthReport path_lengths(const Trace& trace, std::optional<TimeWindow> window = std::nullopt,
                          const WindowRule& tail_rule = {});
double mabuchi_length(const Trace& trace, const TimeWindow& window);
double calabi_length(const Trace& trace, const TimeWindow& window);

struct PerelmanReport {
  double sup_tilde_triple = 0.0;  // sup_t ||u~||_C0 + ||grad u~||_C0 + ||Delta u~||_C0
  double sup_u_triple = 0.0;
  double argmax_t = 0.0;
  double min_r_initial = 0.0;
  double min_r_overall = 0.0;
  double max_min_r_drop = 0.0;  // sup_t (min R(0) floor - min R(t)), <= 0 when monotone
  bool min_r_monotone = true;
};

PerelmanReport perelman_monitor(const Trace& trace, double tolerance = 1e-6);

}  // namespace krf
