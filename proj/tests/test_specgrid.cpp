#include "doctest.h"

#include "krf/specgrid.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace krf;

namespace {

Field powers(const Grid& g, int k) {
  return sample(g, [k](double x) { return std::pow(x, k); });
}

}  // namespace

TEST_CASE("build_grid rejects N outside [8, 1024]") {
  CHECK_THROWS_AS(build_grid(7), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1025), std::invalid_argument);
  CHECK_NOTHROW(build_grid(8));
}

TEST_CASE("grid invariants hold across working sizes") {
  for (int N : {8, 9, 16, 33, 48, 64}) {
    CAPTURE(N);
    auto g = build_grid(N);
    const Field& x = g->nodes();
    CHECK(x[0] == -1.0);
    CHECK(x[N] == 1.0);
    for (int j = 0; j < N; ++j) CHECK(x[j] < x[j + 1]);

    const Field ones = Field::Ones(N + 1);
    CHECK(g->derivative(ones).cwiseAbs().maxCoeff() <= 1e-12);

    for (int j = 0; j <= N; ++j) CHECK(g->weights()[j] == g->weights()[N - j]);

    for (int k = 0; k <= N; ++k) {
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      const double got = g->integrate(powers(*g, k));
      CHECK(std::abs(got - exact) <= 1e-12 * std::max(1.0, exact));
    }

    for (int k = 1; k <= N - 1; ++k) {
      const Field d = g->derivative(powers(*g, k));
      const Field expect = k * powers(*g, k - 1);
      CHECK((d - expect).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1, k));
    }
    for (int k = 2; k <= N - 2; ++k) {
      const Field d = g->second_derivative(powers(*g, k));
      const Field expect = double(k * (k - 1)) * powers(*g, k - 2);
      CHECK((d - expect).cwiseAbs().maxCoeff() <= 1e-10 * k * k);
    }
  }
}

TEST_CASE("large grids stay exact up to rounding growth") {
  // Differentiation rounding grows like eps * N^2 per derivative.
  for (int N : {128, 256}) {
    CAPTURE(N);
    auto g = build_grid(N);
    const double eps = 1e-16 * N * N;
    CHECK(g->derivative(Field::Ones(N + 1)).cwiseAbs().maxCoeff() <= 10 * eps);
    const Field d = g->derivative(powers(*g, 7));
    CHECK((d - 7.0 * powers(*g, 6)).cwiseAbs().maxCoeff() <= 100 * eps);
    const Field d2 = g->second_derivative(powers(*g, 7));
    CHECK((d2 - 42.0 * powers(*g, 5)).cwiseAbs().maxCoeff() <= 100 * eps * N * N);
    CHECK(std::abs(g->integrate(powers(*g, N)) - 2.0 / (N + 1)) <= 1e-12 * 2.0 / (N + 1));
  }
}

TEST_CASE("build_grid examples") {
  auto g8 = build_grid(8);
  CHECK(g8->integrate(powers(*g8, 4)) == doctest::Approx(0.4).epsilon(1e-12));
  const Field d = g8->derivative(powers(*g8, 2));
  CHECK((d - 2.0 * g8->nodes()).cwiseAbs().maxCoeff() <= 1e-13);

  auto g16 = build_grid(16);
  const Field d2 = g16->second_derivative(powers(*g16, 3));
  CHECK((d2 - 6.0 * g16->nodes()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("spectral convergence on analytic fields") {
  auto err = [](int N, auto f, auto df, double integral) {
    auto g = build_grid(N);
    const Field v = sample(*g, f);
    const Field dv = sample(*g, df);
    return std::pair{(g->derivative(v) - dv).cwiseAbs().maxCoeff(),
                     std::abs(g->integrate(v) - integral)};
  };
  const double pi = std::numbers::pi;
  auto s = [pi](double x) { return std::sin(pi * x); };
  auto ds = [pi](double x) { return pi * std::cos(pi * x); };
  const auto [d16, i16] = err(16, s, ds, 0.0);
  const auto [d32, i32] = err(32, s, ds, 0.0);
  CHECK(d32 <= 1e-3 * d16);
  // The odd integrand integrates to zero by symmetry at both sizes.
  CHECK(i16 <= 1e-14);
  CHECK(i32 <= 1e-14);

  auto e = [](double x) { return std::exp(x); };
  const double ie = std::exp(1.0) - std::exp(-1.0);
  const auto [de16, ie16] = err(16, e, e, ie);
  const auto [de32, ie32] = err(32, e, e, ie);
  // e^x is already resolved to rounding at N = 16, so the 10^3 gain is
  // measured against the rounding floor.
  CHECK(de32 <= std::max(1e-3 * de16, 1e-12));
  CHECK(ie32 <= std::max(1e-3 * ie16, 1e-14));

  auto c = [pi](double x) { return std::cos(pi * x) * std::exp(x); };
  auto dc = [pi](double x) {
    return std::exp(x) * (std::cos(pi * x) - pi * std::sin(pi * x));
  };
  const auto [dc16, ic16] = err(16, c, dc, 0.0);
  const auto [dc32, ic32] = err(32, c, dc, 0.0);
  CHECK(dc32 <= 1e-3 * dc16);
  (void)ic16;
  (void)ic32;
}

TEST_CASE("interpolate") {
  auto g = build_grid(16);
  const Field sq = powers(*g, 2);
  CHECK(interpolate(*g, sq, 0.3) == doctest::Approx(0.09).epsilon(1e-12));
  const Field five = Field::Constant(17, 5.0);
  CHECK(interpolate(*g, five, -0.77) == doctest::Approx(5.0).epsilon(1e-14));
  for (int j = 0; j <= 16; ++j) CHECK(interpolate(*g, sq, g->nodes()[j]) == sq[j]);
  CHECK_THROWS_AS(interpolate(*g, sq, 1.0000001), std::invalid_argument);
  CHECK_THROWS_AS(interpolate(*g, sq, std::nan("")), std::invalid_argument);

  auto g32 = build_grid(32);
  const double pi = std::numbers::pi;
  const Field s = sample(*g32, [pi](double x) { return std::sin(pi * x); });
  CHECK(std::abs(interpolate(*g32, s, 0.123) - std::sin(0.123 * pi)) <= 1e-10);
}

TEST_CASE("interpolate agrees with Clenshaw on coefficients") {
  auto g = build_grid(24);
  const Field f = sample(*g, [](double x) { return std::exp(-x) * std::cos(3 * x); });
  const Field c = g->coefficients(f);
  for (double x : {-0.99, -0.4, 0.0, 0.31, 0.97})
    CHECK(evaluate_coefficients(c, x) == doctest::Approx(interpolate(*g, f, x)).epsilon(1e-13));
}

TEST_CASE("c0_norm") {
  auto g8 = build_grid(8);
  CHECK(c0_norm(*g8, g8->nodes()) == doctest::Approx(1.0).epsilon(1e-15));

  auto g16 = build_grid(16);
  const Field bump = sample(*g16, [](double x) { return 1.0 - x * x; });
  CHECK(std::abs(c0_norm(*g16, bump) - 1.0) <= 1e-12);
  const Field p2 = sample(*g16, [](double x) { return 0.5 * (3 * x * x - 1); });
  CHECK(std::abs(c0_norm(*g16, p2) - 1.0) <= 1e-12);

  // Interior maximum between nodes: the oversampled norm sees more than the nodes.
  const Field shifted = sample(*g8, [](double x) { return 1.0 - (x - 0.05) * (x - 0.05); });
  CHECK(c0_norm(*g8, shifted) >= shifted.cwiseAbs().maxCoeff());
  CHECK(c0_norm(*g8, shifted) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("c0_norm dominates the node maximum (random fields)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = build_grid(8 + trial % 20);
    Field f(g->size());
    for (auto& v : f) v = u(rng);
    CHECK(c0_norm(*g, f) >= f.cwiseAbs().maxCoeff());
    CHECK(max_value(*g, f) >= f.maxCoeff());
    CHECK(min_value(*g, f) <= f.minCoeff());
  }
}

TEST_CASE("antiderivative is exact on polynomials and vanishes at -1") {
  auto g = build_grid(20);
  for (int k = 0; k <= 19; ++k) {
    const Field F = g->antiderivative(powers(*g, k));
    const Field expect = sample(*g, [k](double x) {
      return (std::pow(x, k + 1) - std::pow(-1.0, k + 1)) / (k + 1);
    });
    CHECK((F - expect).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(F[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("filter leaves resolved fields alone and damps the top modes") {
  auto g = build_grid(32, FilterSpec{});
  REQUIRE(g->filter().has_value());
  const Field smooth = powers(*g, 5);
  CHECK((*g->filter() * smooth - smooth).cwiseAbs().maxCoeff() <= 1e-12);
  Field zigzag(33);
  for (int j = 0; j <= 32; ++j) zigzag[j] = (j % 2 == 0) ? 1.0 : -1.0;  // T_32
  CHECK((*g->filter() * zigzag).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_FALSE(build_grid(32)->filter().has_value());
}
