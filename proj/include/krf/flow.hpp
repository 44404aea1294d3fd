#pragma once

// Normalized Kähler-Ricci flow in momentum gauge:
//
//   d/dt phi = phi phi'' - phi'^2 - x phi' + phi   (= phi^2 u'')
//
// stepped at fixed x with classical RK4. Scalars attached to the metric are
// stored at fixed x; their time derivative at fixed complex coordinate is
//
//   D_t F = d/dt F|_x + phi u' F'.

#include "krf/geometry.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace krf {

class CflViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PositivityLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-negative solution of the heat equation D_t f = Delta f along the flow.
struct CompanionField {
  std::string label;
  Field f;
};

enum class DtRule { Fixed, Cfl };

struct StepPolicy {
  DtRule rule = DtRule::Fixed;
  double dt = 1e-4;
  double safety = 0.25;
  bool filter = false;
  bool repin = true;
  double cadence = 0.05;             // record spacing
  double checkpoint_cadence = 0.05;  // full-field spacing, a multiple of cadence
  double stencil_halfwidth = 0.005;  // offset of the D_t samples around each checkpoint

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

class FlowState {
 public:
  FlowState(double t, MetricProfile profile, std::vector<CompanionField> companions = {})
      : t_(t), profile_(std::move(profile)), companions_(std::move(companions)) {}

  double t() const { return t_; }
  const MetricProfile& profile() const { return profile_; }
  const std::vector<CompanionField>& companions() const { return companions_; }

  /// Geometry of the current profile; computed on first use.
  const GeometrySnapshot& snapshot() const;

 private:
  double t_;
  MetricProfile profile_;
  std::vector<CompanionField> companions_;
  mutable std::shared_ptr<const GeometrySnapshot> snapshot_;
};

/// Expanded polynomial right-hand side, regular at the degenerate endpoints.
Field krf_rhs(const MetricProfile& profile);

/// phi^2 u'' using the Ricci-potential slope; cross-check for krf_rhs.
Field krf_rhs_potential_form(const MetricProfile& profile);

/// Delta f = (phi f')', the value of D_t f for a heat companion.
Field heat_rhs(const MetricProfile& profile, const Field& f);

/// Fixed-x rate of a heat companion: Delta f - phi u' f' = phi f'' - x f'.
Field companion_rate(const MetricProfile& profile, const Field& f);

/// safety * min_j dx_j^2 / max(phi_j, |phi'_j| d_j), with dx_j the local node
/// spacing and d_j = max(1 - |x_j|, dx_j).
double cfl_dt(const MetricProfile& profile, double safety = 0.25);

/// One RK4 step of size dt for the metric and every companion.
/// Throws CflViolation when dt exceeds the CFL bound and PositivityLoss when
/// the new profile is not positive in the interior.
FlowState step(const FlowState& state, double dt, const StepPolicy& policy);

/// D_t F at the middle of three states spaced h apart:
/// centered difference at fixed x plus the transport term phi u' F'.
Field gauge_time_derivative(const std::vector<const FlowState*>& states,
                            const std::vector<Field>& values);

/// Same, from raw samples: h is the spacing, slope is u' at the middle state.
Field gauge_time_derivative(double h, const Field& before, const Field& middle,
                            const Field& after, const MetricProfile& middle_profile,
                            const Field& slope);

}  // namespace krf
