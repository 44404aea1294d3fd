#include "krf/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace krf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double rel_delta(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

GeometrySnapshot snap(const Trace& trace, const FieldSample& s) {
  return make_snapshot(trace.profile(s));
}

double l2(const Grid& g, const Field& f) { return norms(g, f).l2; }

double exp_tail(const RateFit& fit, double t_end) {
  if (!fit.ok || !(fit.rate < 0.0)) return kInf;
  return std::exp(fit.intercept + fit.rate * t_end) / (-fit.rate);
}

// Ratio num(t + offset) / den(t) over the records.
LemmaReport ratio_check(const std::string& id, const Trace& trace, double offset,
                        const std::function<double(const ObservableRecord&)>& num,
                        const std::function<double(const ObservableRecord&)>& den,
                        const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = id;
  double sup = 0.0, argmax = 0.0;
  double late_sum = 0.0, late_min = kInf, late_max = 0.0;
  std::size_t late_n = 0;
  for (const auto& r : trace.records()) {
    const ObservableRecord* ahead = trace.record_at(r.t + offset);
    if (!ahead) continue;
    const double d = den(r);
    const double n = num(*ahead);
    if (d < cfg.denominator_floor || n < cfg.numerator_floor) {
      ++rep.excluded;
      continue;
    }
    ++rep.samples;
    const double q = n / d;
    if (q > sup) {
      sup = q;
      argmax = r.t;
    }
    if (r.l2_u_tilde <= cfg.late_rule.hi && ahead->l2_u_tilde >= cfg.late_rule.lo) {
      late_sum += q;
      late_min = std::min(late_min, q);
      late_max = std::max(late_max, q);
      ++late_n;
    }
  }
  if (rep.samples == 0) {
    rep.verdict = Verdict::Degenerate;
    rep.notes.push_back("every sample is below the noise floors");
    return rep;
  }
  rep.constants["C_emp"] = sup;
  rep.constants["argmax_t"] = argmax;
  if (late_n > 0) {
    const double mean = late_sum / static_cast<double>(late_n);
    rep.constants["asymptote"] = mean;
    rep.constants["asymptote_spread"] = (late_max - late_min) / mean;
    rep.constants["asymptote_samples"] = static_cast<double>(late_n);
  } else {
    rep.notes.push_back("no samples in the single-mode window");
  }
  rep.verdict = std::isfinite(sup) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

double lp_norm(const Grid& g, const Field& f, double p) {
  const Field fp = f.cwiseMax(0.0).array().pow(p).matrix();
  return std::pow(measure_integral(g, fp), 1.0 / p);
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::Degenerate: return "degenerate";
    case Verdict::HypothesisViolated: return "hypothesis_violated";
  }
  return "unknown";
}

nlohmann::json LemmaReport::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["verdict"] = to_string(verdict);
  j["constants"] = constants;
  j["residuals"] = residuals;
  j["refinement"] = refinement;
  j["samples"] = samples;
  j["excluded"] = excluded;
  j["notes"] = notes;
  return j;
}

Field TestFunction::sample(const Grid& g) const {
  switch (kind) {
    case Kind::Constant: return Field::Ones(g.size());
    case Kind::Linear: return (g.nodes().array() * slope + 1.0).matrix();
    case Kind::Bump:
      return krf::sample(g, [this](double x) { return std::exp(-std::pow((x - center) / width, 2)); });
  }
  return Field::Ones(g.size());
}

std::vector<TestFunction> default_logsobolev_family() {
  using K = TestFunction::Kind;
  std::vector<TestFunction> fam;
  fam.push_back({"constant", K::Constant});
  fam.push_back({"linear", K::Linear, 0.5});
  for (double w : {0.5, 0.25}) {
    for (double c : {0.0, 0.5, -0.7}) {
      fam.push_back({"bump(c=" + fmt(c) + ",w=" + fmt(w) + ")", K::Bump, 0.0, c, w});
    }
  }
  return fam;
}

void VerificationConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("verification: ") + name + " must be positive");
  };
  positive(residual_tol, "residual_tol");
  positive(round_tol, "round_tol");
  positive(supersolution_tol, "supersolution_tol");
  positive(refinement_tol, "refinement_tol");
  positive(denominator_floor, "denominator_floor");
  positive(numerator_floor, "numerator_floor");
  positive(gronwall_rel_tol, "gronwall_rel_tol");
  positive(logsobolev_tol, "logsobolev_tol");
  positive(min_r_tol, "min_r_tol");
  positive(eps_max, "eps_max");
  positive(split_time, "split_time");
  if (!(moser_margin > 0.0 && moser_margin < 0.5))
    throw std::invalid_argument("verification: moser_margin must lie in (0, 0.5)");
  if (d_grad && *d_grad < 0.5) throw std::invalid_argument("verification: D_grad must be >= 1/2");
  if (delta_small < 0.0) throw std::invalid_argument("verification: delta_small must be >= 0");
  for (double e : eps_grid)
    if (!(e > 0.0 && e <= eps_max))
      throw std::invalid_argument("verification: eps grid must lie in (0, eps_max]");
}

std::vector<double> VerificationConfig::epsilons() const {
  if (!eps_grid.empty()) return eps_grid;
  std::vector<double> out;
  const double lo = std::log(std::min(1e-3, eps_max));
  const double hi = std::log(eps_max);
  for (int i = 0; i <= 40; ++i) out.push_back(std::exp(lo + (hi - lo) * i / 40.0));
  out.back() = eps_max;
  return out;
}

std::vector<TestFunction> VerificationConfig::family() const {
  return logsobolev_family.empty() ? default_logsobolev_family() : logsobolev_family;
}

LemmaReport gronwall_check(const std::vector<double>& t, const std::vector<double>& F, double k,
                           double rel_tol) {
  if (t.size() != F.size()) throw std::invalid_argument("gronwall_check: size mismatch");
  LemmaReport rep;
  rep.id = "gronwall";
  rep.constants["k"] = k;
  double scale = 0.0;
  for (double v : F) scale = std::max(scale, std::abs(v));
  const double abs_tol = rel_tol * scale;

  std::size_t hyp_ok = 0, hyp_bad = 0, concl_bad = 0;
  double worst_margin = kInf;
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::size_t j = i;
    while (j + 1 < t.size() && t[j] < t[i] + 1.0 - 1e-9) ++j;
    if (std::abs(t[j] - (t[i] + 1.0)) > 1e-7) continue;
    bool hypothesis = true;
    for (std::size_t m = i; m < j; ++m) {
      const double dt = t[m + 1] - t[m];
      const double dF = (F[m + 1] - F[m]) / dt;
      if (dF > k * std::max(F[m], F[m + 1]) + abs_tol / dt) hypothesis = false;
    }
    if (!hypothesis) {
      ++hyp_bad;
      continue;
    }
    ++hyp_ok;
    const double bound = std::exp(k) * F[i];
    worst_margin = std::min(worst_margin, bound - F[j]);
    if (F[j] > bound + abs_tol + rel_tol * std::abs(bound)) ++concl_bad;
  }
  rep.samples = hyp_ok;
  rep.excluded = hyp_bad;
  rep.residuals["conclusion_violations"] = static_cast<double>(concl_bad);
  rep.residuals["hypothesis_violations"] = static_cast<double>(hyp_bad);
  if (std::isfinite(worst_margin)) rep.constants["worst_margin"] = worst_margin;
  if (concl_bad > 0) {
    rep.verdict = Verdict::Fail;
  } else if (hyp_ok == 0) {
    rep.verdict = hyp_bad > 0 ? Verdict::HypothesisViolated : Verdict::Inconclusive;
    rep.notes.push_back(hyp_bad > 0 ? "F' <= kF fails on every window; conclusion not asserted"
                                    : "no window of length 1 in the series");
  } else {
    rep.verdict = Verdict::Pass;
    if (hyp_bad > 0) rep.notes.push_back(std::to_string(hyp_bad) + " windows skipped: F' <= kF fails");
  }
  return rep;
}

IdentityResiduals identity_residuals(const Trace& trace, const Checkpoint& cp) {
  if (!cp.before || !cp.after) throw std::invalid_argument("identity_residuals: incomplete stencil");
  const Grid& g = *trace.grid();
  const double h = cp.after->t - cp.center.t;
  const GeometrySnapshot sb = snap(trace, *cp.before);
  const GeometrySnapshot sc = snap(trace, cp.center);
  const GeometrySnapshot sa = snap(trace, *cp.after);
  const MetricProfile& p = sc.profile;
  auto Dt = [&](const Field& fb, const Field& fc, const Field& fa) {
    return gauge_time_derivative(h, fb, fc, fa, p, sc.potentials.slope);
  };
  auto lap = [&](const Field& f) { return kahler_laplacian(p, f); };

  const Field& ut = sc.potentials.u_tilde.values;
  const Field& u = sc.potentials.u.values;
  const Field& lu = sc.lap_u_tilde;
  const double grad_mean = average(g, sc.grad_sq);
  const Field ones = Field::Ones(g.size());

  IdentityResiduals r;
  r.t = cp.center.t;

  r.u = l2(g, Dt(sb.potentials.u.values, u, sa.potentials.u.values) -
                  (lu + u - sc.potentials.b * ones));

  const Field dut = Dt(sb.potentials.u_tilde.values, ut, sa.potentials.u_tilde.values);
  r.u_tilde = l2(g, dut - (lu + ut + grad_mean * ones));

  auto sq = [](const GeometrySnapshot& s) { return s.potentials.u_tilde.values.cwiseAbs2().eval(); };
  const Field ut2 = sq(sc);
  r.u_tilde_sq = l2(g, Dt(sq(sb), ut2, sq(sa)) -
                           (lap(ut2) - 2.0 * sc.grad_sq + 2.0 * ut2 + 2.0 * grad_mean * ut));

  const GradientHessian gh = gradient_and_hessian_norms(p, ut);
  r.grad_sq = l2(g, Dt(sb.grad_sq, sc.grad_sq, sa.grad_sq) -
                        (lap(sc.grad_sq) - gh.complex_hessian_sq - gh.real_hessian_sq + sc.grad_sq));

  const Field dlap = Dt(sb.lap_u_tilde, lu, sa.lap_u_tilde);
  const Field base = lap(lu) + lu;
  r.lap_minus = l2(g, dlap - (base - gh.complex_hessian_sq));
  r.lap_plus = l2(g, dlap - (base + gh.complex_hessian_sq));

  const double da = (sa.potentials.a - sb.potentials.a) / (2.0 * h);
  r.a_rate = std::abs(da - ((sc.potentials.a - sc.potentials.b) - grad_mean));
  return r;
}

LemmaReport evolution_residuals(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "evolution_residuals";
  if (trace.meta().stencil_halfwidth > 0.05) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("time stencil wider than 0.05");
    return rep;
  }
  IdentityResiduals worst;
  double worst_t = 0.0;
  for (const auto& cp : trace.checkpoints()) {
    if (!cp.before || !cp.after || cp.center.t < cfg.residual_t_begin - 1e-9) {
      ++rep.excluded;
      continue;
    }
    const IdentityResiduals r = identity_residuals(trace, cp);
    ++rep.samples;
    worst.u = std::max(worst.u, r.u);
    worst.u_tilde = std::max(worst.u_tilde, r.u_tilde);
    worst.u_tilde_sq = std::max(worst.u_tilde_sq, r.u_tilde_sq);
    worst.grad_sq = std::max(worst.grad_sq, r.grad_sq);
    if (r.lap_minus > worst.lap_minus) worst_t = r.t;
    worst.lap_minus = std::max(worst.lap_minus, r.lap_minus);
    worst.lap_plus = std::max(worst.lap_plus, r.lap_plus);
    worst.a_rate = std::max(worst.a_rate, r.a_rate);
  }
  if (rep.samples == 0) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("no checkpoint carries a complete time stencil");
    return rep;
  }
  rep.residuals["i_u"] = worst.u;
  rep.residuals["ii_u_tilde"] = worst.u_tilde;
  rep.residuals["iii_u_tilde_sq"] = worst.u_tilde_sq;
  rep.residuals["iv_grad_sq"] = worst.grad_sq;
  rep.residuals["v_sigma_minus"] = worst.lap_minus;
  rep.residuals["v_sigma_plus"] = worst.lap_plus;
  rep.residuals["a_rate"] = worst.a_rate;
  rep.constants["stencil_halfwidth"] = trace.meta().stencil_halfwidth;
  rep.constants["worst_v_time"] = worst_t;

  const double best_v = std::min(worst.lap_minus, worst.lap_plus);
  const double other_v = std::max(worst.lap_minus, worst.lap_plus);
  rep.constants["sigma_ratio"] = best_v > 0.0 ? other_v / best_v : kInf;
  // On a stationary flow both candidates sit at the rounding floor of the
  // fourth derivative, so a sign is only reported with a clear separation.
  if (other_v <= cfg.round_tol || other_v < 2.0 * best_v) {
    rep.constants["sigma"] = 0.0;
    rep.notes.push_back("quadratic term below resolution; sigma not identifiable");
  } else {
    rep.constants["sigma"] = worst.lap_minus <= worst.lap_plus ? -1.0 : 1.0;
  }
  const bool ok = worst.u <= cfg.residual_tol && worst.u_tilde <= cfg.residual_tol &&
                  worst.u_tilde_sq <= cfg.residual_tol && worst.grad_sq <= cfg.residual_tol &&
                  best_v <= cfg.residual_tol && worst.a_rate <= cfg.residual_tol;
  rep.verdict = ok ? Verdict::Pass : Verdict::Fail;
  return rep;
}

double sup_lap_c0(const Trace& trace) {
  double s = 0.0;
  for (const auto& r : trace.records()) s = std::max(s, r.c0_lap_u_tilde);
  return s;
}

namespace {

enum class Functional { Grad, Lap };

LemmaReport lyapunov(const Trace& trace, double T, double D, Functional which,
                     const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = which == Functional::Grad ? "lyapunov_F_grad" : "lyapunov_F_lap";
  const double bound = which == Functional::Grad ? 0.5 : kDim + 2.0 * sup_lap_c0(trace);
  if (D < bound * (1.0 - 1e-12))
    throw std::invalid_argument(rep.id + ": D = " + fmt(D) + " is below its bound " + fmt(bound));
  const auto i0 = trace.index_of(T);
  const auto i1 = trace.index_of(T + 1.0);
  if (!i0 || !i1) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("window [T, T+1] not inside the trace");
    return rep;
  }
  const auto& recs = trace.records();
  if (recs[*i0].l2_u_tilde < cfg.denominator_floor) {
    rep.verdict = Verdict::Degenerate;
    rep.excluded = 1;
    rep.notes.push_back("||u_tilde||_L2(T) below the floor");
    return rep;
  }
  std::vector<double> t, F;
  double k = 0.0;
  for (std::size_t i = *i0; i <= *i1; ++i) {
    const auto& r = recs[i];
    const double s = r.t - T;
    t.push_back(r.t);
    F.push_back(which == Functional::Grad
                    ? s * r.l2_grad_u_tilde * r.l2_grad_u_tilde + D * r.l2_u_tilde * r.l2_u_tilde
                    : s * r.l2_lap_u_tilde * r.l2_lap_u_tilde +
                          D * r.l2_grad_u_tilde * r.l2_grad_u_tilde);
    k = std::max(k, 2.0 + r.c0_lap_u_tilde);
  }
  const LemmaReport g = gronwall_check(t, F, k, cfg.gronwall_rel_tol);
  double max_rate = -kInf;
  for (std::size_t m = 0; m + 1 < t.size(); ++m)
    max_rate = std::max(max_rate, (std::log(F[m + 1]) - std::log(F[m])) / (t[m + 1] - t[m]));
  rep.samples = t.size();
  rep.constants["D"] = D;
  rep.constants["k_emp"] = k;
  rep.constants["max_dlnF_dt"] = max_rate;
  rep.constants["log_margin"] = k - (std::log(F.back()) - std::log(F.front()));
  rep.residuals = g.residuals;
  // The lemma asserts both F' <= kF and its integrated form.
  if (g.verdict == Verdict::Pass && g.excluded == 0) {
    rep.verdict = Verdict::Pass;
  } else {
    rep.verdict = Verdict::Fail;
    rep.notes.push_back("Gronwall verdict: " + to_string(g.verdict));
  }
  return rep;
}

}  // namespace

LemmaReport lyapunov_F_grad(const Trace& trace, double T, double D, const VerificationConfig& cfg) {
  return lyapunov(trace, T, D, Functional::Grad, cfg);
}

LemmaReport lyapunov_F_lap(const Trace& trace, double T, double D, const VerificationConfig& cfg) {
  return lyapunov(trace, T, D, Functional::Lap, cfg);
}

LemmaReport lyapunov_sweep(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "lyapunov";
  const double d_grad = cfg.d_grad.value_or(0.5);
  const double d_lap = cfg.d_lap.value_or(kDim + 2.0 * sup_lap_c0(trace));
  double k_max = 0.0, min_margin = kInf;
  std::size_t fails = 0;
  for (const auto& r : trace.records()) {
    if (r.t > cfg.window_end + 1e-9 || !trace.record_at(r.t + 1.0)) continue;
    for (const auto& sub : {lyapunov_F_grad(trace, r.t, d_grad, cfg),
                            lyapunov_F_lap(trace, r.t, d_lap, cfg)}) {
      if (sub.verdict == Verdict::Degenerate) {
        ++rep.excluded;
        continue;
      }
      ++rep.samples;
      if (sub.verdict != Verdict::Pass) {
        ++fails;
        if (fails <= 5) rep.notes.push_back(sub.id + " fails at T = " + fmt(r.t));
      }
      k_max = std::max(k_max, sub.constants.at("k_emp"));
      min_margin = std::min(min_margin, sub.constants.at("log_margin"));
    }
  }
  rep.constants["D_grad"] = d_grad;
  rep.constants["D_lap"] = d_lap;
  if (rep.samples == 0) {
    rep.verdict = rep.excluded > 0 ? Verdict::Degenerate : Verdict::Inconclusive;
    return rep;
  }
  rep.constants["k_emp_max"] = k_max;
  rep.constants["min_log_margin"] = min_margin;
  rep.residuals["failures"] = static_cast<double>(fails);
  rep.verdict = fails == 0 ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LemmaReport ratio_grad(const Trace& trace, const VerificationConfig& cfg) {
  return ratio_check(
      "ratio_grad", trace, 1.0, [](const ObservableRecord& r) { return r.l2_grad_u_tilde; },
      [](const ObservableRecord& r) { return r.l2_u_tilde; }, cfg);
}

LemmaReport ratio_lap(const Trace& trace, const VerificationConfig& cfg) {
  return ratio_check(
      "ratio_lap", trace, 1.0, [](const ObservableRecord& r) { return r.l2_lap_u_tilde; },
      [](const ObservableRecord& r) { return r.l2_grad_u_tilde; }, cfg);
}

LemmaReport ratio_smooth(const Trace& trace, const VerificationConfig& cfg) {
  return ratio_check(
      "ratio_smooth", trace, 3.0,
      [](const ObservableRecord& r) { return r.c0_lap_u_tilde + r.c0_grad_u_tilde; },
      [](const ObservableRecord& r) { return r.l2_u_tilde; }, cfg);
}

namespace {

// The two eps-independent terms of the defect for unit-L2 v.
struct DefectTerms {
  double entropy = 0.0;   // int v^2 ln v
  double dirichlet = 0.0; // int |grad v|^2

  double at(double eps) const { return entropy - eps * dirichlet + 0.5 * kDim * std::log(eps); }
};

DefectTerms defect_terms(const MetricProfile& profile, const Field& v) {
  if (v.minCoeff() < -1e-10) throw std::invalid_argument("log_sobolev_defect: v is negative");
  const Grid& g = profile.g();
  Field w = v.cwiseMax(0.0);
  const double mass = std::sqrt(measure_integral(g, w.cwiseAbs2()));
  if (!(mass > 0.0)) throw std::invalid_argument("log_sobolev_defect: v vanishes");
  w /= mass;
  Field ent(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) ent[j] = w[j] > 0.0 ? w[j] * w[j] * std::log(w[j]) : 0.0;
  const Field dw = g.derivative(w);
  return {measure_integral(g, ent), measure_integral(g, profile.phi.cwiseProduct(dw.cwiseAbs2()))};
}

}  // namespace

double log_sobolev_defect(const MetricProfile& profile, const Field& v, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_sobolev_defect: eps must be positive");
  return defect_terms(profile, v).at(eps);
}

LemmaReport calibrate_logsobolev(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "log_sobolev";
  const auto fam = cfg.family();
  const auto eps = cfg.epsilons();
  if (trace.checkpoints().empty()) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("no checkpoints");
    return rep;
  }
  std::vector<Field> vs;
  for (const auto& f : fam) vs.push_back(f.sample(*trace.grid()));

  auto sup_at = [&](const FieldSample& s, std::string* who, double* who_eps) {
    const MetricProfile p = trace.profile(s);
    double best = -kInf;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      const DefectTerms terms = defect_terms(p, vs[i]);
      for (double e : eps) {
        const double d = terms.at(e);
        if (d > best) {
          best = d;
          if (who) *who = fam[i].label;
          if (who_eps) *who_eps = e;
        }
      }
    }
    return best;
  };

  std::string who;
  double who_eps = 0.0;
  const double c_emp = sup_at(trace.checkpoints().front().center, &who, &who_eps);
  double later = -kInf, later_t = 0.0;
  for (std::size_t m = 1; m < trace.checkpoints().size(); ++m) {
    const double s = sup_at(trace.checkpoints()[m].center, nullptr, nullptr);
    if (s > later) {
      later = s;
      later_t = trace.checkpoints()[m].center.t;
    }
  }
  rep.samples = trace.checkpoints().size();
  rep.constants["C_emp"] = c_emp;
  rep.constants["argmax_eps"] = who_eps;
  rep.notes.push_back("sup at t = 0 attained by " + who);
  const double constant_defect = -0.5 * std::log(kVolume);
  rep.residuals["constant_function_closed_form"] =
      std::abs(log_sobolev_defect(trace.profile(trace.checkpoints().front().center),
                                  Field::Ones(trace.grid()->size()), 1.0) -
               constant_defect);
  if (trace.checkpoints().size() == 1) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("no later checkpoints");
    return rep;
  }
  rep.constants["sup_later"] = later;
  rep.constants["sup_later_t"] = later_t;
  rep.residuals["excess"] = later - c_emp;
  rep.verdict = later <= c_emp + cfg.logsobolev_tol ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LemmaReport heat_kernel_check(const Trace& trace, std::size_t companion,
                              const VerificationConfig& cfg) {
  if (companion >= trace.meta().companion_labels.size())
    throw std::out_of_range("heat_kernel_check: companion missing");
  LemmaReport rep;
  rep.id = "heat_kernel:" + trace.meta().companion_labels[companion];
  const Grid& g = *trace.grid();
  double sup = 0.0, argmax = 0.0, min_f = kInf;
  for (const auto& cp : trace.checkpoints()) {
    const Field& f = cp.center.companions.at(companion);
    min_f = std::min(min_f, f.minCoeff());
    if (cp.center.t > cfg.window_end + 1e-9) continue;
    const Checkpoint* ahead = trace.checkpoint_at(cp.center.t + 1.0);
    if (!ahead) continue;
    const double den = norms(g, f).l1;
    if (den < cfg.denominator_floor) {
      ++rep.excluded;
      continue;
    }
    const double q = c0_norm(g, ahead->center.companions.at(companion)) / den;
    if (rep.samples == 0) rep.constants["ratio_t0"] = q;
    ++rep.samples;
    if (q > sup) {
      sup = q;
      argmax = cp.center.t;
    }
  }
  rep.residuals["min_f"] = min_f;
  if (rep.samples == 0) {
    rep.verdict = rep.excluded > 0 ? Verdict::Degenerate : Verdict::Inconclusive;
    return rep;
  }
  rep.constants["C_emp"] = sup;
  rep.constants["argmax_t"] = argmax;
  if (min_f < -1e-10) {
    rep.verdict = Verdict::Fail;
    rep.notes.push_back("companion lost non-negativity");
  } else {
    rep.verdict = std::isfinite(sup) ? Verdict::Pass : Verdict::Fail;
  }
  return rep;
}

LemmaReport supersolution_residual(const Trace& trace, double T, std::optional<double> D,
                                   const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "supersolution";
  const double bound = 2.0 * sup_lap_c0(trace);
  const double d = D.value_or(cfg.d_smooth.value_or(bound));
  if (d < 0.0) throw std::invalid_argument("supersolution_residual: D must be non-negative");
  const bool hypothesis = d >= bound * (1.0 - 1e-12);
  const Grid& g = *trace.grid();

  auto f_of = [&](const GeometrySnapshot& s, double t) {
    const Field lu2 = s.lap_u_tilde.cwiseAbs2();
    return (std::exp(-2.0 * (t - T)) * (lu2 + d * s.grad_sq)).eval();
  };

  double worst = -kInf, worst_t = 0.0, f_scale = 0.0;
  std::map<double, Field> fs;  // f at checkpoint centers, for the smoothing ratio
  for (const auto& cp : trace.checkpoints()) {
    const double t = cp.center.t;
    if (t < T - 1e-9 || t > T + 3.0 + 1e-9) continue;
    const GeometrySnapshot sc = snap(trace, cp.center);
    const Field fc = f_of(sc, t);
    fs[t] = fc;
    f_scale = std::max(f_scale, fc.cwiseAbs().maxCoeff());
    if (!cp.before || !cp.after || cp.before->t < T - 1e-9) continue;
    const double h = cp.after->t - t;
    const Field fb = f_of(snap(trace, *cp.before), cp.before->t);
    const Field fa = f_of(snap(trace, *cp.after), cp.after->t);
    const Field r = gauge_time_derivative(h, fb, fc, fa, sc.profile, sc.potentials.slope) -
                    kahler_laplacian(sc.profile, fc);
    ++rep.samples;
    if (r.maxCoeff() > worst) {
      worst = r.maxCoeff();
      worst_t = t;
    }
  }
  rep.constants["D"] = d;
  rep.constants["D_bound"] = bound;
  if (rep.samples == 0) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("no checkpoint with a time stencil in [T, T+3]");
    return rep;
  }
  rep.residuals["max_residual"] = worst;
  rep.constants["worst_t"] = worst_t;
  rep.constants["f_scale"] = f_scale;

  // The same f through the heat-kernel bound: ||f||_C0(t+1) / ||f||_L1(t).
  double smoothing = 0.0;
  for (const auto& [t, f] : fs) {
    const auto it = fs.lower_bound(t + 1.0 - 1e-7);
    if (it == fs.end() || std::abs(it->first - (t + 1.0)) > 1e-7) continue;
    const double den = norms(g, f).l1;
    if (den >= cfg.denominator_floor) smoothing = std::max(smoothing, c0_norm(g, it->second) / den);
  }
  rep.constants["smoothing_ratio"] = smoothing;

  if (!hypothesis) {
    rep.verdict = Verdict::HypothesisViolated;
    rep.notes.push_back("D below 2 sup ||Delta u_tilde||_C0; sign not asserted");
  } else {
    rep.verdict = worst <= cfg.supersolution_tol ? Verdict::Pass : Verdict::Fail;
    if (f_scale == 0.0) rep.notes.push_back("f vanishes identically");
  }
  return rep;
}

double moser_integral() {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate([](double s) { return -0.5 * std::log(4.0 * s * (1.0 - s)); }, 0.0, 1.0);
}

double moser_exponent(double T, double t) { return 1.0 / (T + 1.0 - t); }

double moser_epsilon(double T, double t) { return 4.0 * (T + 1.0 - t) * (t - T); }

LemmaReport moser_trace(const Trace& trace, std::size_t companion, double T, double c_logsobolev,
                        const VerificationConfig& cfg) {
  if (companion >= trace.meta().companion_labels.size())
    throw std::out_of_range("moser_trace: companion missing");
  LemmaReport rep;
  rep.id = "moser:" + trace.meta().companion_labels[companion];
  const Grid& g = *trace.grid();
  const Checkpoint* start = trace.checkpoint_at(T);
  if (!start || !trace.checkpoint_at(T + 1.0)) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("window [T, T+1] not covered by checkpoints");
    return rep;
  }
  const double l1 = norms(g, start->center.companions.at(companion)).l1;
  if (l1 < cfg.denominator_floor) {
    rep.verdict = Verdict::Degenerate;
    rep.notes.push_back("companion below the floor at T");
    return rep;
  }
  std::vector<double> ts, logs;
  for (const auto& cp : trace.checkpoints()) {
    const double t = cp.center.t;
    if (t < T + cfg.moser_margin - 1e-9 || t > T + 1.0 - cfg.moser_margin + 1e-9) continue;
    const double p = moser_exponent(T, t);
    ts.push_back(t);
    logs.push_back(std::log(lp_norm(g, cp.center.companions.at(companion), p)));
  }
  if (ts.size() < 3) {
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back("fewer than three interior samples");
    return rep;
  }
  double max_rate = -kInf;
  for (std::size_t i = 1; i + 1 < ts.size(); ++i)
    max_rate = std::max(max_rate, (logs[i + 1] - logs[i - 1]) / (ts[i + 1] - ts[i - 1]));

  double r_minus0 = 0.0;
  if (!trace.records().empty()) r_minus0 = std::max(0.0, -trace.records().front().min_r);
  const double integral = moser_integral();
  const double lhs = logs.back() - std::log(l1);
  const double rhs = integral + (r_minus0 + kDim + c_logsobolev);
  rep.samples = ts.size();
  rep.constants["p_last"] = moser_exponent(T, ts.back());
  rep.constants["eps_mid"] = moser_epsilon(T, T + 0.5);
  rep.constants["max_dlog_norm_dt"] = max_rate;
  rep.constants["explicit_integral"] = integral;
  rep.constants["lhs"] = lhs;
  rep.constants["rhs"] = rhs;
  rep.residuals["integral_vs_closed_form"] = std::abs(integral - (1.0 - std::log(2.0)));
  rep.verdict = lhs <= rhs ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LemmaReport min_scalar_monotone(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "min_scalar_monotone";
  if (trace.records().empty()) {
    rep.verdict = Verdict::Inconclusive;
    return rep;
  }
  const double r0 = trace.records().front().min_r;
  const double floor = std::min(r0, static_cast<double>(kDim));
  double worst = kInf, worst_t = 0.0;
  for (const auto& r : trace.records()) {
    if (r.min_r - floor < worst) {
      worst = r.min_r - floor;
      worst_t = r.t;
    }
  }
  rep.samples = trace.records().size();
  rep.constants["min_r_initial"] = r0;
  rep.constants["min_r_final"] = trace.records().back().min_r;
  rep.residuals["worst_drop"] = -worst;
  rep.constants["worst_t"] = worst_t;
  rep.verdict = worst >= -cfg.min_r_tol ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LemmaReport pssw_small_monitor(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "pssw_small";
  rep.constants["delta"] = cfg.delta_small;
  double k_u = 0.0, k_tilde = 0.0, first = kInf;
  bool any_above_floor = false;
  for (const auto& r : trace.records()) {
    if (r.c0_u >= cfg.denominator_floor) any_above_floor = true;
    if (r.c0_u > cfg.delta_small) continue;
    const ObservableRecord* ahead = trace.record_at(r.t + 2.0);
    if (!ahead) continue;
    const double num = ahead->c0_grad_u_tilde + r.c0_r_minus_n;
    if (r.c0_u < cfg.denominator_floor || num < cfg.numerator_floor) {
      ++rep.excluded;
      continue;
    }
    ++rep.samples;
    first = std::min(first, r.t);
    k_u = std::max(k_u, num / r.c0_u);
    if (r.c0_u_tilde >= cfg.denominator_floor) k_tilde = std::max(k_tilde, num / r.c0_u_tilde);
  }
  if (rep.samples == 0) {
    rep.verdict = any_above_floor || cfg.delta_small <= 0.0 ? Verdict::Inconclusive : Verdict::Degenerate;
    rep.notes.push_back("no admissible time with ||u||_C0 <= delta above the floor");
    return rep;
  }
  rep.constants["K_emp"] = k_u;
  rep.constants["K_emp_tilde"] = k_tilde;
  rep.constants["first_small_t"] = first;
  rep.verdict = std::isfinite(k_u) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

LemmaReport theorem_chain(const Trace& trace, const VerificationConfig& cfg) {
  LemmaReport rep;
  rep.id = "theorem_chain";
  const double t_end = trace.t_end();
  const TimeWindow all{0.0, t_end};
  const double i_r = integrate_records(trace, &ObservableRecord::c0_r_minus_n, all);
  const double l_m = mabuchi_length(trace, all);
  rep.constants["I_R"] = i_r;
  rep.constants["mabuchi"] = l_m;
  rep.constants["calabi"] = calabi_length(trace, all);
  rep.samples = trace.records().size();
  if (!trace.complete()) rep.notes.push_back("partial trace: " + trace.abort_reason());

  double sup_dist = 0.0;
  for (const auto& r : trace.records()) sup_dist = std::max(sup_dist, r.c0_profile_dist);
  if (sup_dist <= 1e-10) {
    rep.verdict = Verdict::Pass;
    rep.notes.push_back("stationary at the round metric; all integrals vanish");
    return rep;
  }

  const RateFit fr = rate_fit(trace, &ObservableRecord::c0_r_minus_n, cfg.late_rule);
  const RateFit fm = rate_fit(trace, &ObservableRecord::l2_u_tilde, cfg.late_rule);
  const RateFit fd = rate_fit(trace, &ObservableRecord::c0_profile_dist, cfg.late_rule);
  rep.constants["rate_R"] = fr.ok ? fr.rate : std::nan("");
  rep.constants["rate_u_tilde"] = fm.ok ? fm.rate : std::nan("");
  rep.constants["rate_profile"] = fd.ok ? fd.rate : std::nan("");
  rep.constants["I_R_tail"] = exp_tail(fr, t_end);
  rep.constants["mabuchi_tail"] = exp_tail(fm, t_end);

  const double s = cfg.split_time;
  const double c1 = integrate_records(trace, &ObservableRecord::c0_lap_u_tilde, {0.0, s});
  const double l_shift = mabuchi_length(trace, {0.0, std::max(0.0, t_end - s)});
  rep.constants["C1_emp"] = c1;
  rep.constants["mabuchi_shifted"] = l_shift;
  rep.constants["C2_emp"] = l_shift > 0.0 ? (i_r - c1) / l_shift : kInf;

  const bool converged = fr.ok && fr.rate < 0.0 && fm.ok && fm.rate < 0.0 && fd.ok && fd.rate < 0.0;
  if (!converged) {
    rep.verdict = trace.complete() ? Verdict::Fail : Verdict::Inconclusive;
    if (!fr.ok) rep.notes.push_back("no rate fit for ||R-n||_C0: " + fr.note);
    if (!fd.ok) rep.notes.push_back("no rate fit for the profile distance: " + fd.note);
    return rep;
  }
  rep.verdict = std::isfinite(i_r) && std::isfinite(l_m) ? Verdict::Pass : Verdict::Fail;
  return rep;
}

void apply_refinement(LemmaReport& coarse, const LemmaReport& fine,
                      const std::vector<std::string>& keys, double tol) {
  for (const auto& key : keys) {
    const auto a = coarse.constants.find(key);
    const auto b = fine.constants.find(key);
    if (a == coarse.constants.end() || b == fine.constants.end()) continue;
    const double d = rel_delta(a->second, b->second);
    coarse.refinement[key] = d;
    if (!(d <= tol)) {
      if (coarse.verdict == Verdict::Pass) coarse.verdict = Verdict::Fail;
      coarse.notes.push_back(key + " drifts by " + fmt(100.0 * d) + "% under refinement");
    }
  }
}

}  // namespace krf
