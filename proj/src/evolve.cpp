#include "krf/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace krf {

namespace {

enum EventKind : unsigned {
  kRecord = 1u,
  kCheckpoint = 2u,
  kBefore = 4u,
  kAfter = 8u,
};

struct Event {
  unsigned kinds = 0;
  std::size_t checkpoint = 0;  // index of the checkpoint a stencil sample belongs to
  std::size_t before_of = 0;
  std::size_t after_of = 0;
};

// Event times keyed on a rounded integer grid so that coincident times from
// different sources merge.
class Schedule {
 public:
  void add(double t, unsigned kind, std::size_t cp) {
    const auto key = static_cast<long long>(std::llround(t * 1e9));
    auto& [time, ev] = events_[key];
    time = t;
    ev.kinds |= kind;
    if (kind == kCheckpoint) ev.checkpoint = cp;
    if (kind == kBefore) ev.before_of = cp;
    if (kind == kAfter) ev.after_of = cp;
  }
  const auto& events() const { return events_; }

 private:
  std::map<long long, std::pair<double, Event>> events_;
};

FieldSample sample_of(const FlowState& s) {
  FieldSample out{s.t(), s.profile().phi, {}};
  for (const auto& c : s.companions()) out.companions.push_back(c.f);
  return out;
}

}  // namespace

Trace evolve(const MetricProfile& initial, const StepPolicy& policy, double t_max,
             std::vector<CompanionField> companions, std::string config_hash) {
  policy.validate();
  if (!(t_max >= 0.0)) throw std::invalid_argument("evolve: t_max must be non-negative");
  require_valid(initial);

  TraceMetadata meta;
  meta.config_hash = std::move(config_hash);
  meta.dt_rule = policy.rule == DtRule::Fixed ? "fixed" : "cfl";
  meta.dt = policy.dt;
  meta.cadence = policy.cadence;
  meta.checkpoint_cadence = policy.checkpoint_cadence;
  meta.stencil_halfwidth = policy.stencil_halfwidth;
  meta.t_max = t_max;
  meta.filter = policy.filter;
  meta.repin = policy.repin;
  for (const auto& c : companions) meta.companion_labels.push_back(c.label);
  Trace trace(initial.grid, meta);

  const double h = policy.stencil_halfwidth;
  Schedule sched;
  const auto n_rec = static_cast<std::size_t>(std::floor(t_max / policy.cadence + 1e-9));
  for (std::size_t k = 0; k <= n_rec; ++k) sched.add(k * policy.cadence, kRecord, 0);
  const auto n_cp = static_cast<std::size_t>(std::floor(t_max / policy.checkpoint_cadence + 1e-9));
  for (std::size_t m = 0; m <= n_cp; ++m) {
    const double tc = m * policy.checkpoint_cadence;
    sched.add(tc, kCheckpoint, m);
    if (tc - h >= -1e-12 && tc + h <= t_max + 1e-12) {
      sched.add(tc - h, kBefore, m);
      sched.add(tc + h, kAfter, m);
    }
  }

  std::vector<Checkpoint> cps(n_cp + 1);
  std::vector<bool> have_center(n_cp + 1, false);
  FlowState state(0.0, initial, std::move(companions));

  auto handle = [&](const Event& ev) {
    if (ev.kinds & kRecord) trace.append(record(state));
    if (ev.kinds & kBefore) cps[ev.before_of].before = sample_of(state);
    if (ev.kinds & kCheckpoint) {
      cps[ev.checkpoint].center = sample_of(state);
      have_center[ev.checkpoint] = true;
    }
    if (ev.kinds & kAfter) cps[ev.after_of].after = sample_of(state);
  };

  auto flush_checkpoints = [&] {
    for (std::size_t m = 0; m < cps.size() && have_center[m]; ++m) {
      Checkpoint cp = std::move(cps[m]);
      if (!cp.after) cp.before.reset();
      trace.append(std::move(cp));
    }
  };

  try {
    for (const auto& [key, entry] : sched.events()) {
      const auto& [te, ev] = entry;
      while (state.t() < te) {
        const double remaining = te - state.t();
        double dt = policy.rule == DtRule::Fixed ? policy.dt : cfl_dt(state.profile(), policy.safety);
        const bool land = remaining <= dt * (1.0 + 1e-6);
        if (land) dt = remaining;
        FlowState next = step(state, dt, policy);
        state = land ? FlowState(te, next.profile(), next.companions()) : std::move(next);
      }
      handle(ev);
    }
    flush_checkpoints();
    trace.mark_complete();
  } catch (const std::runtime_error& e) {
    flush_checkpoints();
    trace.mark_aborted(e.what());
  }
  return trace;
}

}  // namespace krf
