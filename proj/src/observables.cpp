#include "krf/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace krf {

ObservableRecord record(const FlowState& state) { return record(state.t(), state.snapshot()); }

ObservableRecord record(double t, const GeometrySnapshot& s) {
  const NormBundle& nb = s.norms;
  ObservableRecord r;
  r.t = t;
  r.l2_u_tilde = nb.u_tilde.l2;
  r.l2_grad_u_tilde = nb.grad_u_tilde.l2;
  r.l2_lap_u_tilde = nb.lap_u_tilde.l2;
  r.c0_u_tilde = nb.u_tilde.c0;
  r.c0_grad_u_tilde = nb.grad_u_tilde.c0;
  r.c0_lap_u_tilde = nb.lap_u_tilde.c0;
  r.c0_r_minus_n = nb.r_minus_n.c0;
  r.a = s.potentials.a;
  r.b = s.potentials.b;
  r.min_r = nb.min_r;
  r.l2_u = nb.u.l2;
  r.l2_lap_u = nb.lap_u_tilde.l2;
  r.c0_profile_dist = distance_to_round(s.profile);
  r.l2_r_minus_n = nb.r_minus_n.l2;
  r.c0_u = nb.u.c0;
  r.l1_u_tilde = nb.u_tilde.l1;
  return r;
}

std::optional<std::size_t> Trace::index_of(double t) const {
  const double slot = t / meta_.cadence;
  const double k = std::round(slot);
  if (k < 0.0 || std::abs(slot - k) > 1e-7) return std::nullopt;
  const auto i = static_cast<std::size_t>(k);
  if (i >= records_.size()) return std::nullopt;
  return i;
}

const ObservableRecord* Trace::record_at(double t) const {
  const auto i = index_of(t);
  return i ? &records_[*i] : nullptr;
}

const Checkpoint* Trace::checkpoint_at(double t) const {
  const double slot = t / meta_.checkpoint_cadence;
  const double k = std::round(slot);
  if (k < 0.0 || std::abs(slot - k) > 1e-7) return nullptr;
  const auto i = static_cast<std::size_t>(k);
  return i < checkpoints_.size() ? &checkpoints_[i] : nullptr;
}

void Trace::append(const ObservableRecord& rec) {
  const double expected = static_cast<double>(records_.size()) * meta_.cadence;
  if (std::abs(rec.t - expected) > 1e-9 * std::max(1.0, expected))
    throw std::logic_error("trace: record time does not match the cadence slot");
  records_.push_back(rec);
}

void Trace::append(Checkpoint cp) {
  const double expected = static_cast<double>(checkpoints_.size()) * meta_.checkpoint_cadence;
  if (std::abs(cp.center.t - expected) > 1e-9 * std::max(1.0, expected))
    throw std::logic_error("trace: checkpoint time does not match the checkpoint cadence");
  checkpoints_.push_back(std::move(cp));
}

RateFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& q) {
  RateFit fit;
  if (t.size() != q.size()) throw std::invalid_argument("fit_log_linear: size mismatch");
  fit.samples = t.size();
  if (t.size() < 2) {
    fit.note = "fewer than two samples in the fit window";
    return fit;
  }
  double st = 0.0, sy = 0.0;
  std::vector<double> y(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0)) {
      fit.note = "non-positive quantity in the fit window";
      return fit;
    }
    y[i] = std::log(q[i]);
    st += t[i];
    sy += y[i];
  }
  const double n = static_cast<double>(t.size());
  const double tm = st / n;
  const double ym = sy / n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y[i] - ym);
  }
  if (stt == 0.0) {
    fit.note = "degenerate time samples";
    return fit;
  }
  fit.rate = sty / stt;
  fit.intercept = ym - fit.rate * tm;
  double ss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.rate * t[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  fit.t_begin = t.front();
  fit.t_end = t.back();
  fit.ok = true;
  return fit;
}

RateFit rate_fit(const Trace& trace, RecordField quantity, const WindowRule& rule) {
  std::vector<double> t, q;
  for (const auto& r : trace.records()) {
    if (r.l2_u_tilde >= rule.lo && r.l2_u_tilde <= rule.hi) {
      t.push_back(r.t);
      q.push_back(r.*quantity);
    }
  }
  RateFit fit = fit_log_linear(t, q);
  if (t.empty()) fit.note = "no samples with ||u_tilde||_L2 inside the fit window";
  return fit;
}

double integrate_records(const Trace& trace, RecordField quantity, const TimeWindow& window,
                         std::size_t stride) {
  const auto& recs = trace.records();
  double total = 0.0;
  const ObservableRecord* prev = nullptr;
  const ObservableRecord* last = nullptr;
  std::size_t k = 0;
  for (const auto& r : recs) {
    if (r.t < window.begin - 1e-9 || r.t > window.end + 1e-9) continue;
    last = &r;
    if (k++ % stride != 0) continue;
    if (prev) total += 0.5 * (r.t - prev->t) * (r.*quantity + prev->*quantity);
    prev = &r;
  }
  if (prev && last != prev) total += 0.5 * (last->t - prev->t) * (last->*quantity + prev->*quantity);
  return total;
}

namespace {

double exp_tail(const RateFit& fit, double t_end) {
  if (!fit.ok || !(fit.rate < 0.0)) return std::numeric_limits<double>::infinity();
  return std::exp(fit.intercept + fit.rate * t_end) / (-fit.rate);
}

double rel_delta(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace

double mabuchi_length(const Trace& trace, const TimeWindow& window) {
  return integrate_records(trace, &ObservableRecord::l2_u_tilde, window);
}

double calabi_length(const Trace& trace, const TimeWindow& window) {
  return integrate_records(trace, &ObservableRecord::l2_lap_u_tilde, window);
}

LengthReport path_lengths(const Trace& trace, std::optional<TimeWindow> window,
                          const WindowRule& tail_rule) {
  LengthReport rep;
  rep.window = window.value_or(TimeWindow{0.0, trace.t_end()});
  rep.partial = !trace.complete() || rep.window.end > trace.t_end() + 1e-9;
  rep.mabuchi = mabuchi_length(trace, rep.window);
  rep.mabuchi_u = integrate_records(trace, &ObservableRecord::l2_u, rep.window);
  rep.calabi = calabi_length(trace, rep.window);

  const RateFit fm = rate_fit(trace, &ObservableRecord::l2_u_tilde, tail_rule);
  const RateFit fc = rate_fit(trace, &ObservableRecord::l2_lap_u_tilde, tail_rule);
  rep.mabuchi_tail = exp_tail(fm, rep.window.end);
  rep.calabi_tail = exp_tail(fc, rep.window.end);

  rep.mabuchi_refinement_delta = rel_delta(
      rep.mabuchi, integrate_records(trace, &ObservableRecord::l2_u_tilde, rep.window, 2));
  rep.calabi_refinement_delta = rel_delta(
      rep.calabi, integrate_records(trace, &ObservableRecord::l2_lap_u_tilde, rep.window, 2));
  return rep;
}

PerelmanReport perelman_monitor(const Trace& trace, double tolerance) {
  PerelmanReport rep;
  const auto& recs = trace.records();
  if (recs.empty()) return rep;
  rep.min_r_initial = recs.front().min_r;
  rep.min_r_overall = recs.front().min_r;
  rep.max_min_r_drop = -std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    const double tilde = r.c0_u_tilde + r.c0_grad_u_tilde + r.c0_lap_u_tilde;
    const double plain = r.c0_u + r.c0_grad_u_tilde + r.c0_lap_u_tilde;
    if (tilde > rep.sup_tilde_triple) {
      rep.sup_tilde_triple = tilde;
      rep.argmax_t = r.t;
    }
    rep.sup_u_triple = std::max(rep.sup_u_triple, plain);
    rep.min_r_overall = std::min(rep.min_r_overall, r.min_r);
    rep.max_min_r_drop = std::max(rep.max_min_r_drop, rep.min_r_initial - r.min_r);
  }
  rep.min_r_monotone = rep.max_min_r_drop <= tolerance;
  return rep;
}

}  // namespace krf
