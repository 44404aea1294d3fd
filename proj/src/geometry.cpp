#include "krf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace krf {

namespace {

std::string describe(const char* what, double value) {
  std::ostringstream os;
  os.precision(6);
  os << what << " (" << value << ")";
  return os.str();
}

}  // namespace

ProfileVerdict validate_profile(const MetricProfile& profile, const ProfileTolerances& tol) {
  const Grid& g = profile.g();
  const Field& phi = profile.phi;
  const Eigen::Index last = phi.size() - 1;
  if (phi.size() != static_cast<Eigen::Index>(g.size()))
    return {false, "profile length does not match grid", 0.0};
  for (Eigen::Index j = 0; j <= last; ++j)
    if (!std::isfinite(phi[j])) return {false, describe("non-finite phi at node", double(j)), 0.0};
  for (Eigen::Index j = 1; j < last; ++j)
    if (phi[j] <= 0.0)
      return {false, describe("phi not positive at interior x", g.nodes()[j]), -phi[j]};
  if (std::abs(phi[0]) > tol.endpoint)
    return {false, describe("phi(-1) nonzero", phi[0]), std::abs(phi[0])};
  if (std::abs(phi[last]) > tol.endpoint)
    return {false, describe("phi(1) nonzero", phi[last]), std::abs(phi[last])};
  const Field dphi = g.derivative(phi);
  if (std::abs(dphi[0] - 1.0) > tol.slope)
    return {false, describe("phi'(-1) != 1", dphi[0]), std::abs(dphi[0] - 1.0)};
  if (std::abs(dphi[last] + 1.0) > tol.slope)
    return {false, describe("phi'(1) != -1", dphi[last]), std::abs(dphi[last] + 1.0)};
  return {};
}

void require_valid(const MetricProfile& profile, const ProfileTolerances& tol) {
  if (auto v = validate_profile(profile, tol); !v) throw InvalidProfile(v.diagnostic);
}

ScalarField scalar_curvature(const MetricProfile& profile) {
  require_valid(profile);
  return {-profile.g().second_derivative(profile.phi), FieldTag::ScalarCurvature};
}

Field kahler_laplacian(const MetricProfile& profile, const Field& f) {
  const Grid& g = profile.g();
  return g.derivative(profile.phi.cwiseProduct(g.derivative(f)));
}

GradientHessian gradient_and_hessian_norms(const MetricProfile& profile, const Field& f) {
  const Grid& g = profile.g();
  const Field df = g.derivative(f);
  const Field ddf = g.derivative(df);
  GradientHessian out;
  out.grad_sq = profile.phi.cwiseProduct(df.cwiseAbs2());
  out.complex_hessian_sq = kahler_laplacian(profile, f).cwiseAbs2();
  out.real_hessian_sq = profile.phi.cwiseAbs2().cwiseProduct(ddf.cwiseAbs2());
  return out;
}

Field ricci_potential_slope(const MetricProfile& profile, double endpoint_guard) {
  const Grid& g = profile.g();
  const Field& x = g.nodes();
  const Field& phi = profile.phi;
  const Field dphi = g.derivative(phi);
  const Field ddphi = g.second_derivative(phi);
  const Eigen::Index last = phi.size() - 1;

  const double q_left = dphi[0] + x[0];
  const double q_right = dphi[last] + x[last];
  if (std::abs(q_left) > endpoint_guard || std::abs(q_right) > endpoint_guard) {
    std::ostringstream os;
    os << "Ricci potential: endpoint numerator phi' + x does not vanish (" << q_left << ", "
       << q_right << ")";
    throw PrecisionLoss(os.str());
  }

  Field slope(phi.size());
  for (Eigen::Index j = 1; j < last; ++j) slope[j] = (dphi[j] + x[j]) / phi[j];
  slope[0] = (ddphi[0] + 1.0) / dphi[0];
  slope[last] = (ddphi[last] + 1.0) / dphi[last];
  return slope;
}

PotentialPair ricci_potential(const MetricProfile& profile, const ProfileTolerances& tol) {
  require_valid(profile, tol);
  const Grid& g = profile.g();

  PotentialPair out;
  out.slope = ricci_potential_slope(profile, tol.slope);
  const Field base = g.antiderivative(out.slope);  // zero at x = -1

  out.u_tilde = {base.array() - average(g, base), FieldTag::RicciPotentialTilde};

  const double shift = std::log(average(g, (-base).array().exp().matrix()));
  out.u = {base.array() + shift, FieldTag::RicciPotentialU};

  out.a = average(g, out.u.values);
  out.b = average(g, out.u.values.cwiseProduct((-out.u.values).array().exp().matrix()));

  const Field r_minus_n = (-g.second_derivative(profile.phi)).array() - kDim;
  const Field lap_u = kahler_laplacian(profile, out.u.values);
  out.laplace_residual = (lap_u + r_minus_n).cwiseAbs().maxCoeff();
  return out;
}

double measure_integral(const Grid& grid, const Field& f) {
  return 2.0 * std::numbers::pi * grid.integrate(f);
}

double average(const Grid& grid, const Field& f) { return measure_integral(grid, f) / kVolume; }

Norms norms(const Grid& grid, const Field& f) {
  Norms n;
  n.l1 = measure_integral(grid, f.cwiseAbs());
  n.l2 = std::sqrt(std::max(0.0, measure_integral(grid, f.cwiseAbs2())));
  n.c0 = c0_norm(grid, f);
  return n;
}

Norms gradient_norms(const MetricProfile& profile, const Field& f) {
  const Grid& g = profile.g();
  const Field df = g.derivative(f);
  const Field grad_sq = profile.phi.cwiseMax(0.0).cwiseProduct(df.cwiseAbs2());
  Norms n;
  n.l1 = measure_integral(g, grad_sq.cwiseSqrt());
  n.l2 = std::sqrt(std::max(0.0, measure_integral(g, grad_sq)));
  n.c0 = std::sqrt(std::max(0.0, max_value(g, grad_sq)));
  return n;
}

GeometrySnapshot make_snapshot(const MetricProfile& profile, const ProfileTolerances& tol) {
  GeometrySnapshot s;
  s.profile = profile;
  s.potentials = ricci_potential(profile, tol);
  const Grid& g = profile.g();
  s.curvature = {-g.second_derivative(profile.phi), FieldTag::ScalarCurvature};
  const Field& ut = s.potentials.u_tilde.values;
  s.lap_u_tilde = kahler_laplacian(profile, ut);
  s.grad_sq = profile.phi.cwiseMax(0.0).cwiseProduct(g.derivative(ut).cwiseAbs2());

  NormBundle& nb = s.norms;
  nb.u_tilde = norms(g, ut);
  nb.grad_u_tilde = gradient_norms(profile, ut);
  nb.lap_u_tilde = norms(g, s.lap_u_tilde);
  nb.r_minus_n = norms(g, s.curvature.values.array() - kDim);
  nb.u = norms(g, s.potentials.u.values);
  nb.min_r = min_value(g, s.curvature.values);
  return s;
}

MetricProfile round_profile(GridPtr grid) { return beta_profile(std::move(grid), 0.0); }

MetricProfile beta_profile(GridPtr grid, double beta) {
  Field phi = sample(*grid, [beta](double x) {
    const double s = 1.0 - x * x;
    return 0.5 * s * (1.0 + beta * s);
  });
  phi[0] = 0.0;
  phi[phi.size() - 1] = 0.0;
  return {std::move(grid), std::move(phi)};
}

MetricProfile chebyshev_profile(GridPtr grid, const std::vector<double>& coefficients) {
  Field phi = sample(*grid, [&coefficients](double x) {
    const double s = 1.0 - x * x;
    double h = 1.0;
    double t_prev = 1.0;  // T_{k-1}
    double t_cur = 1.0;   // T_k
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
      if (k == 1) {
        t_cur = x;
      } else if (k > 1) {
        const double next = 2.0 * x * t_cur - t_prev;
        t_prev = t_cur;
        t_cur = next;
      }
      h += coefficients[k] * s * t_cur;
    }
    return 0.5 * s * h;
  });
  phi[0] = 0.0;
  phi[phi.size() - 1] = 0.0;
  return {std::move(grid), std::move(phi)};
}

double distance_to_round(const MetricProfile& profile) {
  const Field diff = profile.phi - round_profile(profile.grid).phi;
  return c0_norm(profile.g(), diff);
}

}  // namespace krf
