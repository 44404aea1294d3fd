#include "krf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace krf {

namespace {

bool is_multiple(double value, double unit) {
  const double r = value / unit;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

// d/dt phi without validation; used inside the RK stages.
Field rhs_unchecked(const Grid& g, const Field& phi) {
  const Field d1 = g.derivative(phi);
  const Field d2 = g.second_derivative(phi);
  const Field& x = g.nodes();
  return phi.cwiseProduct(d2) - d1.cwiseAbs2() - x.cwiseProduct(d1) + phi;
}

Field companion_rate_unchecked(const Grid& g, const Field& phi, const Field& f) {
  return phi.cwiseProduct(g.second_derivative(f)) - g.nodes().cwiseProduct(g.derivative(f));
}

}  // namespace

void StepPolicy::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("step policy: dt must be positive");
  if (rule == DtRule::Cfl && !(safety > 0.0))
    throw std::invalid_argument("step policy: CFL safety factor must be positive");
  if (!(cadence > 0.0) || !is_multiple(1.0, cadence))
    throw std::invalid_argument("step policy: cadence must divide 1.0 exactly");
  if (!(checkpoint_cadence > 0.0) || !is_multiple(checkpoint_cadence, cadence))
    throw std::invalid_argument("step policy: checkpoint cadence must be a multiple of cadence");
  if (!(stencil_halfwidth > 0.0) || stencil_halfwidth >= checkpoint_cadence)
    throw std::invalid_argument(
        "step policy: stencil half-width must be positive and below the checkpoint cadence");
  if (rule == DtRule::Fixed) {
    if (!is_multiple(cadence, dt))
      throw std::invalid_argument("step policy: cadence must be a multiple of dt");
    if (!is_multiple(stencil_halfwidth, dt))
      throw std::invalid_argument("step policy: stencil half-width must be a multiple of dt");
  }
}

const GeometrySnapshot& FlowState::snapshot() const {
  if (!snapshot_) snapshot_ = std::make_shared<const GeometrySnapshot>(make_snapshot(profile_));
  return *snapshot_;
}

Field krf_rhs(const MetricProfile& profile) {
  require_valid(profile);
  return rhs_unchecked(profile.g(), profile.phi);
}

Field krf_rhs_potential_form(const MetricProfile& profile) {
  require_valid(profile);
  const Field slope = ricci_potential_slope(profile);
  const Field curv = profile.g().derivative(slope);
  return profile.phi.cwiseAbs2().cwiseProduct(curv);
}

Field heat_rhs(const MetricProfile& profile, const Field& f) {
  require_valid(profile);
  return kahler_laplacian(profile, f);
}

Field companion_rate(const MetricProfile& profile, const Field& f) {
  require_valid(profile);
  return companion_rate_unchecked(profile.g(), profile.phi, f);
}

double cfl_dt(const MetricProfile& profile, double safety) {
  const Grid& g = profile.g();
  const Field& x = g.nodes();
  const Field dphi = g.derivative(profile.phi);
  const Eigen::Index n = x.size();
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    double dx = std::numeric_limits<double>::infinity();
    if (j > 0) dx = std::min(dx, x[j] - x[j - 1]);
    if (j + 1 < n) dx = std::min(dx, x[j + 1] - x[j]);
    const double dist = std::max(1.0 - std::abs(x[j]), dx);
    const double scale = std::max(profile.phi[j], std::abs(dphi[j]) * dist);
    if (scale > 0.0) bound = std::min(bound, dx * dx / scale);
  }
  return safety * bound;
}

FlowState step(const FlowState& state, double dt, const StepPolicy& policy) {
  const MetricProfile& prof = state.profile();
  const Grid& g = prof.g();
  const double limit = cfl_dt(prof, policy.safety);
  if (dt > limit * (1.0 + 1e-6)) {
    std::ostringstream os;
    os << "CFL violation at t=" << state.t() << ": dt=" << dt << " exceeds bound " << limit;
    throw CflViolation(os.str());
  }

  const std::size_t nc = state.companions().size();
  struct Stage {
    Field phi;
    std::vector<Field> comp;
  };
  auto eval = [&](const Field& phi, const std::vector<Field>& comp) {
    Stage k{rhs_unchecked(g, phi), {}};
    k.comp.reserve(nc);
    for (const Field& f : comp) k.comp.push_back(companion_rate_unchecked(g, phi, f));
    return k;
  };
  auto axpy = [&](const Field& phi, const std::vector<Field>& comp, double h, const Stage& k) {
    Stage s{phi + h * k.phi, {}};
    s.comp.reserve(nc);
    for (std::size_t i = 0; i < nc; ++i) s.comp.push_back(comp[i] + h * k.comp[i]);
    return s;
  };

  std::vector<Field> comp0;
  comp0.reserve(nc);
  for (const auto& c : state.companions()) comp0.push_back(c.f);

  const Stage k1 = eval(prof.phi, comp0);
  const Stage s2 = axpy(prof.phi, comp0, 0.5 * dt, k1);
  const Stage k2 = eval(s2.phi, s2.comp);
  const Stage s3 = axpy(prof.phi, comp0, 0.5 * dt, k2);
  const Stage k3 = eval(s3.phi, s3.comp);
  const Stage s4 = axpy(prof.phi, comp0, dt, k3);
  const Stage k4 = eval(s4.phi, s4.comp);

  Field phi = prof.phi + dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
  std::vector<CompanionField> comps = state.companions();
  for (std::size_t i = 0; i < nc; ++i)
    comps[i].f += dt / 6.0 * (k1.comp[i] + 2.0 * k2.comp[i] + 2.0 * k3.comp[i] + k4.comp[i]);

  if (policy.filter && g.filter()) {
    phi = *g.filter() * phi;
    for (auto& c : comps) c.f = *g.filter() * c.f;
  }
  if (policy.repin) {
    phi[0] = 0.0;
    phi[phi.size() - 1] = 0.0;
  }

  const double t_new = state.t() + dt;
  for (Eigen::Index j = 1; j + 1 < phi.size(); ++j) {
    if (!(phi[j] > 0.0)) {
      std::ostringstream os;
      os << "positivity lost at t=" << t_new << ": phi(" << g.nodes()[j] << ") = " << phi[j];
      throw PositivityLoss(os.str());
    }
  }
  return FlowState(t_new, MetricProfile{prof.grid, std::move(phi)}, std::move(comps));
}

Field gauge_time_derivative(double h, const Field& before, const Field& middle,
                            const Field& after, const MetricProfile& middle_profile,
                            const Field& slope) {
  const Grid& g = middle_profile.g();
  const Field transport = middle_profile.phi.cwiseProduct(slope);
  return (after - before) / (2.0 * h) + transport.cwiseProduct(g.derivative(middle));
}

Field gauge_time_derivative(const std::vector<const FlowState*>& states,
                            const std::vector<Field>& values) {
  if (states.size() < 3 || values.size() != states.size())
    throw std::invalid_argument("gauge_time_derivative: need three states with matching values");
  const std::size_t mid = states.size() / 2;
  const double h_left = states[mid]->t() - states[mid - 1]->t();
  const double h_right = states[mid + 1]->t() - states[mid]->t();
  if (!(h_left > 0.0) || std::abs(h_left - h_right) > 1e-9 * h_left)
    throw std::invalid_argument("gauge_time_derivative: stencil must be uniform in time");
  const FlowState& m = *states[mid];
  return gauge_time_derivative(h_left, values[mid - 1], values[mid], values[mid + 1],
                               m.profile(), m.snapshot().potentials.slope);
}

}  // namespace krf
