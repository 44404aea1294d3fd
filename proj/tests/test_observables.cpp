#include "doctest.h"

#include "krf/evolve.hpp"
#include "krf/observables.hpp"

#include <cmath>
#include <numbers>

using namespace krf;

namespace {

const Trace& beta_run() {
  static const Trace trace = evolve(beta_profile(build_grid(48), 0.1), StepPolicy{}, 20.0);
  return trace;
}

Trace synthetic(double cadence, int n, double (*q)(double)) {
  TraceMetadata meta;
  meta.cadence = cadence;
  meta.checkpoint_cadence = cadence;
  Trace tr(build_grid(8), meta);
  for (int k = 0; k < n; ++k) {
    ObservableRecord r;
    r.t = k * cadence;
    r.l2_u_tilde = q(r.t);
    r.l2_lap_u_tilde = 3.0 * q(r.t);
    tr.append(r);
  }
  tr.mark_complete();
  return tr;
}

}  // namespace

TEST_CASE("record examples") {
  auto g = build_grid(48);
  const auto r0 = record(FlowState(0.0, round_profile(g)));
  CHECK(r0.l2_u_tilde <= 1e-13);
  CHECK(r0.c0_grad_u_tilde <= 1e-12);
  CHECK(r0.c0_lap_u_tilde <= 1e-10);
  CHECK(std::abs(r0.a) <= 1e-13);
  CHECK(std::abs(r0.b) <= 1e-13);
  CHECK(r0.min_r == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r0.c0_profile_dist == 0.0);

  const auto r = record(FlowState(0.0, beta_profile(g, 0.1)));
  CHECK(r.l2_u_tilde == doctest::Approx(0.200064376585023).epsilon(1e-10));
  CHECK(r.c0_r_minus_n == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(r.min_r == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(r.c0_profile_dist == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(std::abs(r.c0_lap_u_tilde - r.c0_r_minus_n) <= 1e-10);
  CHECK(std::abs(r.l2_lap_u_tilde - r.l2_r_minus_n) <= 1e-10);
  CHECK(r.l2_lap_u == r.l2_lap_u_tilde);
}

TEST_CASE("Trace enforces the cadence and answers exact lookups") {
  TraceMetadata meta;
  meta.cadence = 0.05;
  meta.checkpoint_cadence = 0.5;
  Trace tr(build_grid(8), meta);
  ObservableRecord r;
  r.t = 0.05;
  CHECK_THROWS_AS(tr.append(r), std::logic_error);
  for (int k = 0; k <= 100; ++k) {
    r.t = k * 0.05;
    tr.append(r);
  }
  for (double t : {0.0, 0.35, 1.0}) {
    for (int off : {1, 2, 3}) {
      const auto* hit = tr.record_at(t + off);
      REQUIRE(hit != nullptr);
      CHECK(std::abs(hit->t - (t + off)) <= 1e-12);
    }
  }
  CHECK(tr.record_at(0.025) == nullptr);
  CHECK(tr.record_at(5.05) == nullptr);
  CHECK(tr.record_at(-0.05) == nullptr);
  CHECK(tr.index_of(2.0) == std::optional<std::size_t>(40));
  Checkpoint cp;
  cp.center.t = 0.25;
  CHECK_THROWS_AS(tr.append(cp), std::logic_error);
}

TEST_CASE("rate fits") {
  const auto tr = synthetic(0.05, 101, [](double t) { return 5e-4 * std::exp(-2 * t); });
  const auto f = rate_fit(tr, &ObservableRecord::l2_u_tilde);
  REQUIRE(f.ok);
  CHECK(f.rate == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(f.residual <= 1e-12);
  CHECK(f.t_begin == doctest::Approx(0.0));

  const auto direct = fit_log_linear({0.0, 1.0, 2.0}, {5.0, 5 * std::exp(-2.0), 5 * std::exp(-4.0)});
  CHECK(direct.rate == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(direct.intercept == doctest::Approx(std::log(5.0)).epsilon(1e-14));

  const auto big = synthetic(0.05, 21, [](double) { return 1.0; });
  const auto none = rate_fit(big, &ObservableRecord::l2_u_tilde);
  CHECK_FALSE(none.ok);
  CHECK_FALSE(none.note.empty());
  CHECK_FALSE(fit_log_linear({0.0, 1.0}, {1.0, 0.0}).ok);
}

TEST_CASE("time integrals of records") {
  const auto tr = synthetic(0.05, 201, [](double t) { return std::exp(-2 * t); });
  const double exact = 0.5 * (1.0 - std::exp(-20.0));
  const double m = mabuchi_length(tr, {0.0, 10.0});
  CHECK(m == doctest::Approx(exact).epsilon(1e-3));
  CHECK(calabi_length(tr, {0.0, 10.0}) == doctest::Approx(3 * m).epsilon(1e-14));
  // Monotone in the window end.
  double prev = 0.0;
  for (double end = 0.0; end <= 10.0; end += 0.35) {
    const double v = mabuchi_length(tr, {0.0, end});
    CHECK(v >= prev);
    prev = v;
  }
  // Stride 2 with an odd sample count closes on the last sample.
  const auto odd = synthetic(0.05, 4, [](double) { return 1.0; });
  CHECK(integrate_records(odd, &ObservableRecord::l2_u_tilde, {0.0, 0.15}, 2) ==
        doctest::Approx(0.15));

  const auto rep = path_lengths(tr);
  CHECK(rep.mabuchi_tail >= 0.0);
  CHECK(rep.mabuchi_tail <= 1e-8);
  CHECK_FALSE(rep.partial);
  CHECK(rep.quadrature == "trapezoid");
}

TEST_CASE("evolve: round profile stays fixed") {
  const auto tr = evolve(round_profile(build_grid(48)), StepPolicy{}, 5.0);
  CHECK(tr.complete());
  CHECK(tr.records().size() == 101);
  CHECK(tr.checkpoints().size() == 101);
  for (const auto& r : tr.records()) REQUIRE(r.c0_profile_dist <= 1e-8);
  const auto rep = path_lengths(tr);
  CHECK(rep.mabuchi <= 1e-10);
  CHECK(rep.calabi <= 1e-8);
  const auto p = perelman_monitor(tr);
  CHECK(p.sup_tilde_triple <= 1e-8);
  CHECK(p.min_r_monotone);
}

TEST_CASE("evolve: schedule and stencil samples") {
  StepPolicy pol;
  pol.checkpoint_cadence = 0.5;
  const auto tr = evolve(beta_profile(build_grid(32), 0.1), pol, 1.0);
  REQUIRE(tr.complete());
  CHECK(tr.records().size() == 21);
  REQUIRE(tr.checkpoints().size() == 3);
  CHECK_FALSE(tr.checkpoints()[0].before);  // t - h < 0
  CHECK_FALSE(tr.checkpoints()[0].after);
  REQUIRE(tr.checkpoints()[1].before);
  REQUIRE(tr.checkpoints()[1].after);
  CHECK(tr.checkpoints()[1].before->t == doctest::Approx(0.495).epsilon(1e-12));
  CHECK(tr.checkpoints()[1].after->t == doctest::Approx(0.505).epsilon(1e-12));
  CHECK_FALSE(tr.checkpoints()[2].after);  // t + h > t_max
  CHECK(tr.checkpoint_at(0.5) == &tr.checkpoints()[1]);
  // The center sample reproduces the stored record.
  const auto rec = record(FlowState(0.5, tr.profile(tr.checkpoints()[1].center)));
  CHECK(rec.l2_u_tilde == tr.record_at(0.5)->l2_u_tilde);
  // Deterministic.
  const auto again = evolve(beta_profile(build_grid(32), 0.1), pol, 1.0);
  CHECK(again.records().back().l2_u_tilde == tr.records().back().l2_u_tilde);
  CHECK((again.checkpoints()[2].center.phi - tr.checkpoints()[2].center.phi).norm() == 0.0);
}

TEST_CASE("evolve: aborts leave a flagged partial trace") {
  StepPolicy pol;
  pol.dt = 0.01;
  pol.stencil_halfwidth = 0.01;
  const auto tr = evolve(beta_profile(build_grid(48), 0.1), pol, 1.0);
  CHECK_FALSE(tr.complete());
  CHECK(tr.abort_reason().find("CFL") != std::string::npos);
  CHECK(tr.records().size() == 1);
  CHECK(path_lengths(tr).partial);
  CHECK_THROWS_AS(evolve(beta_profile(build_grid(48), -1.2), StepPolicy{}, 1.0), InvalidProfile);
}

TEST_CASE("evolve: beta family converges") {
  const Trace& tr = beta_run();
  REQUIRE(tr.complete());
  REQUIRE(tr.records().size() == 401);
  CHECK(tr.records().back().c0_r_minus_n <= 1e-6);

  // Boundary preservation.
  for (const auto& cp : tr.checkpoints()) {
    const Field d = tr.grid()->derivative(cp.center.phi);
    REQUIRE(std::abs(cp.center.phi[0]) <= 1e-10);
    REQUIRE(std::abs(d[0] - 1.0) <= 1e-5);
    REQUIRE(std::abs(d[d.size() - 1] + 1.0) <= 1e-5);
  }
  // Delta u_tilde and R - n agree at every record.
  for (const auto& r : tr.records()) {
    REQUIRE(std::abs(r.c0_lap_u_tilde - r.c0_r_minus_n) <= 1e-10);
    REQUIRE(std::abs(r.l2_lap_u_tilde - r.l2_r_minus_n) <= 1e-10);
  }

  const auto fit = rate_fit(tr, &ObservableRecord::l2_u_tilde);
  REQUIRE(fit.ok);
  CHECK(fit.rate >= -2.2);
  CHECK(fit.rate <= -1.8);
  CHECK(fit.residual <= 1e-2);

  // ||Delta u_tilde|| / ||u_tilde|| tends to the l = 2 eigenvalue 3.
  const auto* late = tr.record_at(6.0);
  CHECK(late->l2_lap_u_tilde / late->l2_u_tilde == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("path lengths and Perelman monitor on the beta family") {
  const Trace& tr = beta_run();
  const auto rep = path_lengths(tr);
  MESSAGE("mabuchi " << rep.mabuchi << " calabi " << rep.calabi);
  CHECK(rep.mabuchi >= 0.08);
  CHECK(rep.mabuchi <= 0.13);
  CHECK(rep.calabi > rep.mabuchi);
  CHECK(rep.mabuchi_tail <= 1e-10);
  CHECK(rep.mabuchi_u > 0.0);

  StepPolicy fine;
  fine.cadence = 0.025;
  fine.checkpoint_cadence = 0.5;
  const auto tr2 = evolve(beta_profile(build_grid(48), 0.1), fine, 20.0);
  const double m2 = mabuchi_length(tr2, {0.0, 20.0});
  CHECK(std::abs(m2 - rep.mabuchi) <= 1e-3 * rep.mabuchi);

  const auto p = perelman_monitor(tr);
  CHECK(p.sup_tilde_triple > 0.0);
  CHECK(std::isfinite(p.sup_tilde_triple));
  CHECK(p.argmax_t <= 0.5);
  CHECK(p.min_r_initial == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(p.min_r_monotone);
  CHECK(p.sup_u_triple >= p.sup_tilde_triple - 0.1);
}

TEST_CASE("odd l = 3 seed decays at rate 5") {
  // h = 1 + c (1 - x^2) x makes the profile perturbation the exact l = 3
  // eigenmode; the amplitude keeps the quadratic l = 2 by-product below the
  // fit window.
  auto g = build_grid(48);
  const auto tr = evolve(chebyshev_profile(g, {0.0, 1e-4}), StepPolicy{}, 4.0);
  REQUIRE(tr.complete());
  const auto fit = rate_fit(tr, &ObservableRecord::l2_u_tilde);
  REQUIRE(fit.ok);
  MESSAGE("odd rate " << fit.rate << " over [" << fit.t_begin << ", " << fit.t_end << "]");
  CHECK(fit.rate >= -5.5);
  CHECK(fit.rate <= -4.5);
}
