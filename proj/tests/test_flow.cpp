#include "doctest.h"

#include "krf/evolve.hpp"
#include "krf/flow.hpp"

#include <cmath>
#include <random>

using namespace krf;

namespace {

MetricProfile random_profile(std::mt19937_64& rng, int N, double amplitude = 0.15) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<double> c(5);
  for (auto& v : c) v = u(rng);
  return chebyshev_profile(build_grid(N), c);
}

FlowState run_to(FlowState s, double t_end, double dt, const StepPolicy& policy) {
  const auto n = static_cast<long>(std::llround(t_end / dt));
  for (long k = 0; k < n; ++k) s = step(s, dt, policy);
  return s;
}

}  // namespace

TEST_CASE("krf_rhs examples") {
  auto g = build_grid(32);
  CHECK(krf_rhs(round_profile(g)).cwiseAbs().maxCoeff() <= 1e-10);

  const Field rhs = krf_rhs(beta_profile(g, 0.1));
  CHECK(rhs[16] == doctest::Approx(-0.11).epsilon(1e-10));
  CHECK(std::abs(rhs[0]) <= 1e-8);
  CHECK(std::abs(rhs[32]) <= 1e-8);

  CHECK_THROWS_AS(krf_rhs(MetricProfile{g, Field::Ones(33)}), InvalidProfile);
}

TEST_CASE("krf_rhs: endpoints vanish and the two forms agree") {
  // The potential form divides by h, so its truncation error depends on how
  // close h comes to zero; moderate perturbations are resolved at N = 32.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_profile(rng, 32 + 2 * trial, 0.05);
    const Field a = krf_rhs(p);
    const Field b = krf_rhs_potential_form(p);
    const auto n = a.size();
    CHECK(std::abs(a[0]) <= 1e-8);
    CHECK(std::abs(a[n - 1]) <= 1e-8);
    CHECK((a.segment(1, n - 2) - b.segment(1, n - 2)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("StepPolicy validation") {
  StepPolicy p;
  CHECK_NOTHROW(p.validate());
  StepPolicy bad = p;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.cadence = 0.3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.checkpoint_cadence = 0.07;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.rule = DtRule::Cfl;
  bad.safety = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.dt = 3e-4;  // does not divide the cadence
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.stencil_halfwidth = 0.05;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("cfl_dt") {
  const double b32 = cfl_dt(round_profile(build_grid(32)));
  const double b64 = cfl_dt(round_profile(build_grid(64)));
  MESSAGE("round CFL bound: N=32 -> " << b32 << ", N=64 -> " << b64);
  CHECK(b32 > 1e-4);
  CHECK(b32 < 1e-2);
  CHECK(b64 < b32);
  CHECK(cfl_dt(round_profile(build_grid(32)), 0.0) == 0.0);
  // Boundary spacing 1 - cos(pi/N) sets the scale.
  const double dx = 1.0 - std::cos(M_PI / 32);
  CHECK(b32 == doctest::Approx(0.25 * dx).epsilon(1e-6));
}

TEST_CASE("step: round is stationary and re-pinned") {
  auto g = build_grid(32);
  StepPolicy pol;
  FlowState s(0.0, round_profile(g));
  const FlowState n = step(s, 1e-4, pol);
  CHECK(n.t() == doctest::Approx(1e-4));
  CHECK((n.profile().phi - s.profile().phi).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(n.profile().phi[0] == 0.0);
  CHECK(n.profile().phi[32] == 0.0);
  CHECK_THROWS_AS(step(s, 1.0, pol), CflViolation);
}

TEST_CASE("step: positivity loss is reported") {
  auto g = build_grid(32);
  Field phi = round_profile(g).phi;
  phi[16] = -1e-3;
  FlowState s(0.0, MetricProfile{g, phi});
  CHECK_THROWS_AS(step(s, 1e-4, StepPolicy{}), PositivityLoss);

  // A deep but positive profile evolves normally.
  FlowState deep(0.0, beta_profile(g, -0.6));
  CHECK(validate_profile(deep.profile()).valid);
  CHECK_NOTHROW(run_to(deep, 0.01, 1e-4, StepPolicy{}));
}

TEST_CASE("step: fourth-order convergence in time") {
  // The beta family is so smooth that RK4 errors sit at rounding level for
  // every dt below the CFL bound; a T_16 perturbation excites modes stiff
  // enough to expose the truncation error.
  auto g = build_grid(48);
  StepPolicy pol;
  {
    const FlowState s0(0.0, beta_profile(g, 0.1));
    const Field ref = run_to(s0, 1.0, 2.5e-5, pol).profile().phi;
    CHECK((run_to(s0, 1.0, 4e-4, pol).profile().phi - ref).cwiseAbs().maxCoeff() <= 1e-13);
  }
  std::vector<double> c(17, 0.0);
  c[16] = 0.05;
  const FlowState s0(0.0, chebyshev_profile(g, c));
  const Field ref = run_to(s0, 1.0, 2.5e-5, pol).profile().phi;
  std::vector<double> err;
  for (double dt : {4e-4, 2e-4, 1e-4}) {
    err.push_back((run_to(s0, 1.0, dt, pol).profile().phi - ref).cwiseAbs().maxCoeff());
  }
  MESSAGE("temporal errors: " << err[0] << " " << err[1] << " " << err[2]);
  CHECK(err[0] / err[1] >= 14.0);
  CHECK(err[1] / err[2] >= 14.0);
  const double order = std::log2(err[0] / err[2]) / 2.0;
  CHECK(order >= 3.5);
  CHECK(order <= 4.5);
}

TEST_CASE("heat companions") {
  auto g = build_grid(32);
  const auto round = round_profile(g);
  CHECK(heat_rhs(beta_profile(g, 0.1), Field::Ones(33)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(companion_rate(beta_profile(g, 0.1), Field::Ones(33)).cwiseAbs().maxCoeff() <= 1e-12);

  // Frozen round background: 1 + x decays as 1 + e^{-t} x.
  const Field f0 = g->nodes().array() + 1.0;
  FlowState s(0.0, round, {{"linear", f0}});
  s = run_to(s, 1.0, 1e-3, StepPolicy{});
  const Field expect = g->nodes().array() * std::exp(-1.0) + 1.0;
  CHECK((s.companions()[0].f - expect).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("heat companions obey the maximum principle on a moving background") {
  auto g = build_grid(48);
  const Field bump = sample(*g, [](double x) { return std::exp(-std::pow((x - 0.3) / 0.3, 2)); });
  FlowState s(0.0, beta_profile(g, 0.3), {{"bump", bump}});
  StepPolicy pol;
  double prev_max = bump.maxCoeff();
  for (int k = 0; k < 2000; ++k) {
    s = step(s, 1e-4, pol);
    const Field& f = s.companions()[0].f;
    REQUIRE(f.minCoeff() >= -1e-10);
    REQUIRE(f.maxCoeff() <= prev_max + 1e-12);
    prev_max = f.maxCoeff();
  }
  CHECK(prev_max < bump.maxCoeff());
}

TEST_CASE("gauge_time_derivative") {
  auto g = build_grid(64);
  StepPolicy pol;
  const double h = 0.005;

  // Round flow with a static field.
  {
    FlowState a(0.0, round_profile(g));
    FlowState b = run_to(a, h, 1e-4, pol);
    FlowState c = run_to(b, h, 1e-4, pol);
    const Field F = sample(*g, [](double x) { return std::sin(3 * x); });
    const Field d = gauge_time_derivative({&a, &b, &c}, {F, F, F});
    CHECK(d.cwiseAbs().maxCoeff() <= 1e-10);
  }

  FlowState a = run_to(FlowState(0.0, beta_profile(g, 0.1)), 0.5 - h, 1e-4, pol);
  FlowState b = run_to(a, h, 1e-4, pol);
  FlowState c = run_to(b, h, 1e-4, pol);

  // Coordinate field: pure transport phi u'.
  {
    const Field x = g->nodes();
    const Field d = gauge_time_derivative({&a, &b, &c}, {x, x, x});
    const Field expect = b.profile().phi.cwiseProduct(b.snapshot().potentials.slope);
    CHECK((d - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Evolution of the zero-average Ricci potential.
  {
    const auto& sb = b.snapshot();
    const Field d = gauge_time_derivative(
        {&a, &b, &c}, {a.snapshot().potentials.u_tilde.values, sb.potentials.u_tilde.values,
                       c.snapshot().potentials.u_tilde.values});
    const double grad_mean = average(*g, sb.grad_sq);
    const Field expect = sb.lap_u_tilde + sb.potentials.u_tilde.values +
                         Field::Constant(g->size(), grad_mean);
    const double resid = (d - expect).cwiseAbs().maxCoeff();
    MESSAGE("D_t u_tilde residual: " << resid);
    CHECK(resid <= 1e-5);
  }

  CHECK_THROWS_AS(gauge_time_derivative({&a, &b}, {Field(), Field()}), std::invalid_argument);
  CHECK_THROWS_AS(gauge_time_derivative({&a, &c, &b}, {Field(), Field(), Field()}),
                  std::invalid_argument);
}
