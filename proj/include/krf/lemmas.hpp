#pragma once

// Verification harness: residuals of the evolution identities and empirical
// constants for each quantitative estimate, computed from a finished trace.

#include "krf/observables.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace krf {

enum class Verdict { Pass, Fail, Inconclusive, Degenerate, HypothesisViolated };

std::string to_string(Verdict v);

struct LemmaReport {
  std::string id;
  Verdict verdict = Verdict::Inconclusive;
  std::map<std::string, double> constants;
  std::map<std::string, double> residuals;
  std::map<std::string, double> refinement;  // relative deltas against a refined run
  std::size_t samples = 0;
  std::size_t excluded = 0;  // samples dropped by a floor
  std::vector<std::string> notes;

  bool violated() const { return verdict == Verdict::Fail; }
  nlohmann::json to_json() const;
};

/// Log-Sobolev test function: v(x) on the moment interval, fixed in x.
struct TestFunction {
  std::string label;
  enum class Kind { Constant, Linear, Bump } kind = Kind::Constant;
  double slope = 0.0;   // Linear: 1 + slope x
  double center = 0.0;  // Bump: exp(-((x - center) / width)^2)
  double width = 1.0;

  Field sample(const Grid& g) const;
};

std::vector<TestFunction> default_logsobolev_family();

struct VerificationConfig {
  double residual_tol = 1e-5;       // L2 residual of each evolution identity
  double round_tol = 1e-10;         // residuals on the stationary round flow
  double residual_t_begin = 0.5;    // first checkpoint used for the identities
  double supersolution_tol = 1e-4;  // pointwise (D_t - Delta) f
  double refinement_tol = 0.10;     // relative drift of empirical constants
  double denominator_floor = 1e-10;
  double numerator_floor = 1e-9;    // rounding level of the C0 curvature norms
  double gronwall_rel_tol = 1e-9;
  std::optional<double> d_grad;     // default 1/2
  std::optional<double> d_lap;      // default n + 2 sup ||Delta u~||_C0
  std::optional<double> d_smooth;   // default 2 sup ||Delta u~||_C0
  double delta_small = 0.05;
  double eps_max = 10.0;            // A
  std::vector<double> eps_grid;     // default: 41 log-spaced values in [1e-3, A]
  std::vector<TestFunction> logsobolev_family;  // default_logsobolev_family()
  double logsobolev_tol = 1e-3;
  double min_r_tol = 1e-6;
  double moser_margin = 0.05;
  double window_end = 15.0;         // last window start T for the sweeps
  double split_time = 3.0;
  WindowRule late_rule{};           // single-mode regime for the asymptotes

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
  std::vector<double> epsilons() const;
  std::vector<TestFunction> family() const;
};

/// F(t + 1) <= e^k F(t) wherever F' <= k F holds on [t, t + 1].
LemmaReport gronwall_check(const std::vector<double>& t, const std::vector<double>& F, double k,
                           double rel_tol = 1e-9);

struct IdentityResiduals {
  double t = 0.0;
  double u = 0.0;            // (i)
  double u_tilde = 0.0;      // (ii)
  double u_tilde_sq = 0.0;   // (iii)
  double grad_sq = 0.0;      // (iv)
  double lap_minus = 0.0;    // (v), sigma = -1
  double lap_plus = 0.0;     // (v), sigma = +1
  double a_rate = 0.0;       // scalar identity for a
};

/// Residuals of every identity at one checkpoint with both stencil samples.
IdentityResiduals identity_residuals(const Trace& trace, const Checkpoint& cp);

LemmaReport evolution_residuals(const Trace& trace, const VerificationConfig& cfg = {});

/// F(t) = int (t - T)|grad u~|^2 + D u~^2 and its Laplacian variant on [T, T + 1].
LemmaReport lyapunov_F_grad(const Trace& trace, double T, double D,
                            const VerificationConfig& cfg = {});
LemmaReport lyapunov_F_lap(const Trace& trace, double T, double D,
                           const VerificationConfig& cfg = {});
/// Both functionals at every sampled T in [0, window_end] with default D.
LemmaReport lyapunov_sweep(const Trace& trace, const VerificationConfig& cfg = {});

double sup_lap_c0(const Trace& trace);

LemmaReport ratio_grad(const Trace& trace, const VerificationConfig& cfg = {});
LemmaReport ratio_lap(const Trace& trace, const VerificationConfig& cfg = {});
LemmaReport ratio_smooth(const Trace& trace, const VerificationConfig& cfg = {});

/// int v^2 ln v - eps int |grad v|^2 + (n/2) ln eps, with v rescaled to unit L2.
double log_sobolev_defect(const MetricProfile& profile, const Field& v, double eps);
LemmaReport calibrate_logsobolev(const Trace& trace, const VerificationConfig& cfg = {});

/// sup_t ||f||_C0(t + 1) / ||f||_L1(t) for the companion with the given index.
LemmaReport heat_kernel_check(const Trace& trace, std::size_t companion,
                              const VerificationConfig& cfg = {});

LemmaReport supersolution_residual(const Trace& trace, double T, std::optional<double> D,
                                   const VerificationConfig& cfg = {});

/// int_0^1 -(1/2) ln(4 s (1 - s)) ds by double-exponential quadrature.
double moser_integral();
double moser_exponent(double T, double t);  // p(t) = 1 / (T + 1 - t)
double moser_epsilon(double T, double t);   // 4 (T + 1 - t)(t - T)
LemmaReport moser_trace(const Trace& trace, std::size_t companion, double T, double c_logsobolev,
                        const VerificationConfig& cfg = {});

LemmaReport min_scalar_monotone(const Trace& trace, const VerificationConfig& cfg = {});
LemmaReport pssw_small_monitor(const Trace& trace, const VerificationConfig& cfg = {});
LemmaReport theorem_chain(const Trace& trace, const VerificationConfig& cfg = {});

/// Relative drift of the listed constants between a run and its refinement;
/// fails the coarse report when any drift exceeds tol.
void apply_refinement(LemmaReport& coarse, const LemmaReport& fine,
                      const std::vector<std::string>& keys, double tol);

}  // namespace krf
