#include "doctest.h"

#include "krf/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace krf;

namespace {

constexpr double kPi = std::numbers::pi;

MetricProfile random_profile(std::mt19937_64& rng, int N) {
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  std::vector<double> c(5);
  for (auto& v : c) v = u(rng);
  return chebyshev_profile(build_grid(N), c);
}

Field random_smooth(std::mt19937_64& rng, const Grid& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> c(7);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = n(rng) / (1.0 + k * k);
  return sample(g, [&c](double x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) acc += c[k] * std::cos(k * std::acos(x));
    return acc + 0.3 * std::sin(2 * x);
  });
}

}  // namespace

TEST_CASE("validate_profile examples") {
  auto g = build_grid(32);
  CHECK(validate_profile(round_profile(g)).valid);

  MetricProfile wrong{g, sample(*g, [](double x) { return 1.0 - x * x; })};
  const auto v = validate_profile(wrong);
  CHECK_FALSE(v.valid);
  CHECK(v.diagnostic.find("phi'(-1)") != std::string::npos);
  CHECK(v.magnitude == doctest::Approx(1.0).epsilon(1e-10));

  CHECK(validate_profile(beta_profile(g, 0.1)).valid);

  MetricProfile negative = beta_profile(g, -1.2);
  const auto vn = validate_profile(negative);
  CHECK_FALSE(vn.valid);
  CHECK(vn.diagnostic.find("not positive") != std::string::npos);

  MetricProfile lifted = round_profile(g);
  lifted.phi[0] = 1e-8;
  CHECK_FALSE(validate_profile(lifted).valid);
  CHECK_THROWS_AS(require_valid(lifted), InvalidProfile);
}

TEST_CASE("beta-family boundary factor keeps the endpoint slopes (symbolic)") {
  // phi = (1 - x^2)(1 + b(1 - x^2))/2  =>  phi' = -x(1 + 2b(1 - x^2)), so phi'(-+1) = +-1.
  auto g = build_grid(32);
  const double beta = 0.1;
  const Field dphi = g->derivative(beta_profile(g, beta).phi);
  const Field expect = sample(*g, [beta](double x) { return -x * (1 + 2 * beta * (1 - x * x)); });
  CHECK((dphi - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scalar_curvature") {
  auto g = build_grid(32);
  const Field r0 = scalar_curvature(round_profile(g)).values;
  CHECK((r0.array() - 1.0).abs().maxCoeff() <= 1e-10);

  // Closed form for the beta family: R = 1 + 2 beta (1 - 3 x^2).
  const Field r = scalar_curvature(beta_profile(g, 0.1)).values;
  const Field expect = sample(*g, [](double x) { return 1 + 0.2 * (1 - 3 * x * x); });
  CHECK((r - expect).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(r[0] == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(r[32] == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(r[16] == doctest::Approx(1.2).epsilon(1e-10));

  CHECK_THROWS_AS(scalar_curvature(MetricProfile{g, Field::Ones(33)}), InvalidProfile);
}

TEST_CASE("Gauss-Bonnet on random valid profiles") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_profile(rng, 32 + trial);
    REQUIRE(validate_profile(p).valid);
    const double mean_r = average(p.g(), scalar_curvature(p).values);
    CHECK(std::abs(mean_r - 1.0) <= 1e-10);
  }
}

TEST_CASE("kahler_laplacian") {
  auto g = build_grid(32);
  const auto round = round_profile(g);
  CHECK(kahler_laplacian(round, Field::Constant(33, 2.5)).cwiseAbs().maxCoeff() <= 1e-12);
  const Field x = g->nodes();
  CHECK((kahler_laplacian(round, x) + x).cwiseAbs().maxCoeff() <= 1e-12);
  const Field p2 = sample(*g, [](double s) { return 0.5 * (3 * s * s - 1); });
  CHECK((kahler_laplacian(round, p2) + 3.0 * p2).cwiseAbs().maxCoeff() <= 1e-12);
  // Legendre spectrum l(l+1)/2 for l = 3.
  const Field p3 = sample(*g, [](double s) { return 0.5 * (5 * s * s * s - 3 * s); });
  CHECK((kahler_laplacian(round, p3) + 6.0 * p3).cwiseAbs().maxCoeff() <= 1e-11);

  std::mt19937_64 rng(5);
  const auto p = random_profile(rng, 40);
  const Field f = random_smooth(rng, p.g());
  CHECK(std::abs(measure_integral(p.g(), kahler_laplacian(p, f))) <= 1e-11);
}

TEST_CASE("gradient_and_hessian_norms") {
  auto g = build_grid(32);
  const auto round = round_profile(g);
  const auto zero = gradient_and_hessian_norms(round, Field::Constant(33, -4.0));
  CHECK(zero.grad_sq.cwiseAbs().maxCoeff() <= 1e-24);
  CHECK(zero.complex_hessian_sq.cwiseAbs().maxCoeff() <= 1e-24);
  CHECK(zero.real_hessian_sq.cwiseAbs().maxCoeff() <= 1e-24);

  const auto lin = gradient_and_hessian_norms(round, g->nodes());
  CHECK((lin.grad_sq - round.phi).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(lin.real_hessian_sq.cwiseAbs().maxCoeff() <= 1e-20);
  // Bochner for f = x on the round sphere: 0 = 2 pi (2/3) - 2 pi (2/3).
  const double lap_sq = measure_integral(*g, lin.complex_hessian_sq);
  const double r_grad = measure_integral(*g, lin.grad_sq);  // R = 1
  CHECK(lap_sq == doctest::Approx(2 * kPi * 2.0 / 3.0).epsilon(1e-12));
  CHECK(r_grad == doctest::Approx(2 * kPi * 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("integral identities on random profiles and fields") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_profile(rng, 40 + trial);
    const Grid& g = p.g();
    const Field f = random_smooth(rng, g);
    const Field h = random_smooth(rng, g);
    const auto gh = gradient_and_hessian_norms(p, f);
    const Field lf = kahler_laplacian(p, f);
    const Field lh = kahler_laplacian(p, h);
    const Field r = scalar_curvature(p).values;

    const double scale = measure_integral(g, lf.cwiseAbs2()) + measure_integral(g, gh.grad_sq) +
                         measure_integral(g, f.cwiseAbs2()) + 1.0;
    // Self-adjointness and the energy identity.
    CHECK(std::abs(measure_integral(g, f.cwiseProduct(lh)) -
                   measure_integral(g, h.cwiseProduct(lf))) <= 1e-9 * scale);
    CHECK(std::abs(measure_integral(g, f.cwiseProduct(lf)) + measure_integral(g, gh.grad_sq)) <=
          1e-9 * scale);
    // Bochner.
    const double lhs = measure_integral(g, gh.real_hessian_sq);
    const double rhs = measure_integral(g, gh.complex_hessian_sq) -
                       measure_integral(g, r.cwiseProduct(gh.grad_sq));
    CHECK(std::abs(lhs - rhs) <= 1e-8 * scale);
    // n = 1: |grad gradbar f|^2 is (Delta f)^2 at every node.
    CHECK((gh.complex_hessian_sq - lf.cwiseAbs2()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ricci_potential on the round profile") {
  auto g = build_grid(32);
  const auto pp = ricci_potential(round_profile(g));
  CHECK(pp.u_tilde.values.cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(pp.u.values.cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(std::abs(pp.a) <= 1e-13);
  CHECK(std::abs(pp.b) <= 1e-13);
}

TEST_CASE("ricci_potential on the beta family") {
  // Oracle values from adaptive quadrature of u = 2 ln(1 + 0.1 (1 - x^2)) at
  // 30 digits: u_tilde(0), ||u_tilde||_L2, a, b.
  constexpr double kUt0 = 0.0623345427924707568661;
  constexpr double kL2 = 0.200064376585023194914;
  constexpr double kA = 0.00161229749465027871115;
  constexpr double kB = -0.00163164618112369460796;
  for (int N : {32, 48, 64}) {
    CAPTURE(N);
    auto g = build_grid(N);
    const auto p = beta_profile(g, 0.1);
    const auto pp = ricci_potential(p);
    CHECK(pp.u_tilde.tag == FieldTag::RicciPotentialTilde);
    CHECK(pp.u.tag == FieldTag::RicciPotentialU);

    // Slope u' = -4 beta x / (1 + beta (1 - x^2)).
    const Field slope = sample(*g, [](double x) { return -0.4 * x / (1 + 0.1 * (1 - x * x)); });
    CHECK((pp.slope - slope).cwiseAbs().maxCoeff() <= 1e-9);

    CHECK(interpolate(*g, pp.u_tilde.values, 0.0) == doctest::Approx(kUt0).epsilon(1e-10));
    CHECK(norms(*g, pp.u_tilde.values).l2 == doctest::Approx(kL2).epsilon(1e-10));
    CHECK(pp.a == doctest::Approx(kA).epsilon(1e-9));
    CHECK(pp.b == doctest::Approx(kB).epsilon(1e-9));
    CHECK(pp.b != doctest::Approx(pp.a));
    CHECK(std::abs(pp.b) <= norms(*g, pp.u_tilde.values).c0);

    CHECK(std::abs(measure_integral(*g, pp.u_tilde.values)) <= 1e-10 * kVolume);
    CHECK(std::abs(average(*g, (-pp.u.values).array().exp().matrix()) - 1.0) <= 1e-10);
    const Field diff = pp.u.values - pp.u_tilde.values;
    CHECK(diff.maxCoeff() - diff.minCoeff() <= 1e-10);
    CHECK(pp.laplace_residual <= 1e-8);
  }
}

TEST_CASE("normalizations re-derive each other idempotently") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_profile(rng, 48);
    const Grid& g = p.g();
    const auto pp = ricci_potential(p);
    // u_tilde from u: subtract the omega-average a.
    const Field ut = pp.u.values.array() - pp.a;
    CHECK((ut - pp.u_tilde.values).cwiseAbs().maxCoeff() <= 1e-12);
    // u from u_tilde: shift by ln of the Gibbs mass.
    const double shift = std::log(average(g, (-pp.u_tilde.values).array().exp().matrix()));
    const Field u = pp.u_tilde.values.array() + shift;
    CHECK((u - pp.u.values).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(shift - pp.a) <= 1e-12);
    CHECK(pp.laplace_residual <= 1e-8);
  }
}

TEST_CASE("ricci_potential_slope guards the endpoint cancellation") {
  auto g = build_grid(32);
  // Slopes phi'(-+1) = +-1.001: valid shape, wrong class.
  MetricProfile off{g, sample(*g, [](double x) { return 0.5005 * (1 - x * x); })};
  CHECK_THROWS_AS(ricci_potential_slope(off), PrecisionLoss);
  CHECK_THROWS_AS(ricci_potential(off), InvalidProfile);
  CHECK_NOTHROW(ricci_potential_slope(off, 1e-2));
}

TEST_CASE("measure_integral and norms") {
  auto g = build_grid(32);
  CHECK(measure_integral(*g, Field::Ones(33)) == doctest::Approx(4 * kPi).epsilon(1e-14));
  CHECK(norms(*g, g->nodes()).l2 == doctest::Approx(std::sqrt(4 * kPi / 3)).epsilon(1e-13));
  CHECK(norms(*g, g->nodes()).l2 == doctest::Approx(2.0466534158929770).epsilon(1e-13));
  const Field shifted = g->nodes().array() + 1.0;
  CHECK(norms(*g, shifted).l1 == doctest::Approx(4 * kPi).epsilon(1e-12));

  auto g16 = build_grid(16);
  const Field p2 = sample(*g16, [](double s) { return 0.5 * (3 * s * s - 1); });
  const auto gn = gradient_norms(round_profile(g16), p2);
  CHECK(std::abs(gn.c0 - std::sqrt(9.0 / 8.0)) <= 1e-12);
  CHECK(gn.l2 == doctest::Approx(std::sqrt(3 * 4 * kPi / 5)).epsilon(1e-12));
}

TEST_CASE("snapshot norm bundle matches recomputation") {
  auto g = build_grid(48);
  const auto p = beta_profile(g, 0.1);
  const auto s = make_snapshot(p);
  const auto pp = ricci_potential(p);
  CHECK(std::abs(s.norms.u_tilde.l2 - norms(*g, pp.u_tilde.values).l2) <= 1e-12);
  CHECK(std::abs(s.norms.grad_u_tilde.c0 - gradient_norms(p, pp.u_tilde.values).c0) <= 1e-12);
  CHECK(std::abs(s.norms.r_minus_n.c0 - 0.4) <= 1e-10);
  CHECK(std::abs(s.norms.lap_u_tilde.c0 - s.norms.r_minus_n.c0) <= 1e-10);
  CHECK(std::abs(s.norms.lap_u_tilde.l2 - s.norms.r_minus_n.l2) <= 1e-10);
  CHECK(s.norms.min_r == doctest::Approx(0.6).epsilon(1e-10));
}
