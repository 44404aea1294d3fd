#pragma once

#include "krf/observables.hpp"

#include <string>
#include <vector>

namespace krf {

/// Runs the flow from t = 0 to t_max. Records land exactly on multiples of the
/// cadence, checkpoints on multiples of the checkpoint cadence, and each
/// checkpoint carries samples at t -+ stencil_halfwidth when both fit in
/// [0, t_max]. A positivity or CFL failure ends the run early; the partial
/// trace is returned with complete() == false.
Trace evolve(const MetricProfile& initial, const StepPolicy& policy, double t_max,
             std::vector<CompanionField> companions = {}, std::string config_hash = {});

}  // namespace krf
