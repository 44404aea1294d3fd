#include "krf/suite.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace krf {

namespace {

LemmaReport guarded(const std::string& id, const std::function<LemmaReport()>& check) {
  try {
    return check();
  } catch (const std::exception& e) {
    LemmaReport rep;
    rep.id = id;
    rep.verdict = Verdict::Inconclusive;
    rep.notes.push_back(std::string("check raised: ") + e.what());
    return rep;
  }
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<LemmaReport> run_suite(const Trace& trace, const SuiteConfig& cfg) {
  const VerificationConfig& v = cfg.lemmas;
  std::vector<LemmaReport> out;
  auto add = [&](const std::string& id, const std::function<LemmaReport()>& check) {
    if (cfg.enabled(id)) out.push_back(guarded(id, check));
  };
  const std::size_t nc = trace.meta().companion_labels.size();

  add("evolution_residuals", [&] { return evolution_residuals(trace, v); });
  add("lyapunov", [&] { return lyapunov_sweep(trace, v); });
  add("ratio_grad", [&] { return ratio_grad(trace, v); });
  add("ratio_lap", [&] { return ratio_lap(trace, v); });
  add("ratio_smooth", [&] { return ratio_smooth(trace, v); });

  std::optional<LemmaReport> ls;
  if (cfg.enabled("log_sobolev") || (cfg.enabled("moser") && nc > 0)) {
    ls = guarded("log_sobolev", [&] { return calibrate_logsobolev(trace, v); });
    if (cfg.enabled("log_sobolev")) out.push_back(*ls);
  }
  if (cfg.enabled("heat_kernel"))
    for (std::size_t c = 0; c < nc; ++c)
      out.push_back(guarded("heat_kernel:" + trace.meta().companion_labels[c],
                            [&] { return heat_kernel_check(trace, c, v); }));
  if (cfg.enabled("supersolution")) {
    for (double T : cfg.supersolution_T) {
      LemmaReport rep = guarded("supersolution", [&] { return supersolution_residual(trace, T, std::nullopt, v); });
      rep.id = "supersolution:T=" + num(T);
      out.push_back(std::move(rep));
    }
  }
  if (cfg.enabled("moser")) {
    std::optional<double> c_ls;
    if (ls && ls->constants.count("C_emp")) c_ls = ls->constants.at("C_emp");
    for (std::size_t k = 0; k < nc; ++k) {
      const std::string id = "moser:" + trace.meta().companion_labels[k];
      if (!c_ls) {
        LemmaReport rep;
        rep.id = id;
        rep.notes.push_back("log-Sobolev constant unavailable");
        out.push_back(rep);
        continue;
      }
      out.push_back(guarded(id, [&] { return moser_trace(trace, k, cfg.moser_T, *c_ls, v); }));
    }
  }
  add("min_scalar_monotone", [&] { return min_scalar_monotone(trace, v); });
  add("pssw_small", [&] { return pssw_small_monitor(trace, v); });
  add("theorem_chain", [&] { return theorem_chain(trace, v); });
  return out;
}

std::optional<double> hitting_time(const Trace& trace, RecordField field, double threshold) {
  const auto& recs = trace.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double q = recs[i].*field;
    if (q > threshold) continue;
    if (i == 0) return recs[0].t;
    const double p = recs[i - 1].*field;
    const double s = (std::log(p) - std::log(threshold)) / (std::log(p) - std::log(q));
    return recs[i - 1].t + s * (recs[i].t - recs[i - 1].t);
  }
  return std::nullopt;
}

std::map<std::string, double> summarize(const Trace& trace) {
  std::map<std::string, double> s;
  const double nan = std::nan("");
  s["t_end"] = trace.t_end();
  s["records"] = static_cast<double>(trace.records().size());
  s["checkpoints"] = static_cast<double>(trace.checkpoints().size());
  if (trace.records().empty()) return s;
  const ObservableRecord& f = trace.records().back();
  s["final_c0_R_minus_n"] = f.c0_r_minus_n;
  s["final_l2_u_tilde"] = f.l2_u_tilde;
  s["final_c0_profile_dist"] = f.c0_profile_dist;
  s["initial_c0_profile_dist"] = trace.records().front().c0_profile_dist;
  const LengthReport len = path_lengths(trace);
  s["mabuchi"] = len.mabuchi;
  s["calabi"] = len.calabi;
  s["I_R"] = integrate_records(trace, &ObservableRecord::c0_r_minus_n, {0.0, trace.t_end()});
  const RateFit fu = rate_fit(trace, &ObservableRecord::l2_u_tilde);
  const RateFit fr = rate_fit(trace, &ObservableRecord::c0_r_minus_n);
  s["rate_u_tilde"] = fu.ok ? fu.rate : nan;
  s["rate_R"] = fr.ok ? fr.rate : nan;
  s["t_hit_R_1e-6"] = hitting_time(trace, &ObservableRecord::c0_r_minus_n, 1e-6).value_or(nan);
  const PerelmanReport pm = perelman_monitor(trace);
  s["min_R_overall"] = pm.min_r_overall;
  s["sup_tilde_triple"] = pm.sup_tilde_triple;
  return s;
}

std::map<std::string, double> flatten(const std::vector<LemmaReport>& reports) {
  std::map<std::string, double> out;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.constants) out[r.id + "." + k] = v;
    for (const auto& [k, v] : r.residuals) out[r.id + ".residual." + k] = v;
  }
  return out;
}

}  // namespace krf
