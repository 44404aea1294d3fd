#pragma once

// Momentum-gauge description of S^1-invariant Kähler metrics on CP^1.
//
// A metric in the class 2*pi*c_1 is a profile phi on [-1, 1] with phi > 0 in
// the interior, phi(+-1) = 0 and phi'(-1) = 1, phi'(1) = -1. The area form is
// dx ^ dtheta, so integrals against omega are 2*pi times integrals in x and the
// total volume is 4*pi. Complex dimension n = 1 throughout.
//
//   Laplacian          Delta f   = (phi f')'
//   scalar curvature   R         = -phi''
//   gradient norm      |grad f|^2 = phi f'^2
//   Ricci potential    u'        = (phi' + x) / phi,  -Delta u = R - 1

#include "krf/specgrid.hpp"

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace krf {

inline constexpr double kVolume = 4.0 * std::numbers::pi;
inline constexpr double kDim = 1.0;

class InvalidProfile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Endpoint numerator of u' failed to vanish; direct division would be unreliable.
class PrecisionLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProfileTolerances {
  double endpoint = 1e-10;
  double slope = 1e-6;
};

struct MetricProfile {
  GridPtr grid;
  Field phi;

  const Grid& g() const { return *grid; }
};

enum class FieldTag { Generic, RicciPotentialU, RicciPotentialTilde, ScalarCurvature };

struct ScalarField {
  Field values;
  FieldTag tag = FieldTag::Generic;
};

struct ProfileVerdict {
  bool valid = true;
  std::string diagnostic;  // first violated invariant, empty when valid
  double magnitude = 0.0;  // size of the violation

  explicit operator bool() const { return valid; }
};

ProfileVerdict validate_profile(const MetricProfile& profile, const ProfileTolerances& tol = {});

/// Throws InvalidProfile with the verdict's diagnostic.
void require_valid(const MetricProfile& profile, const ProfileTolerances& tol = {});

ScalarField scalar_curvature(const MetricProfile& profile);

Field kahler_laplacian(const MetricProfile& profile, const Field& f);

struct GradientHessian {
  Field grad_sq;            // |grad f|^2        = phi f'^2
  Field complex_hessian_sq; // |grad gradbar f|^2 = (Delta f)^2 for n = 1
  Field real_hessian_sq;    // |grad^2 f|^2      = phi^2 f''^2
};

GradientHessian gradient_and_hessian_norms(const MetricProfile& profile, const Field& f);

enum class Normalization { ZeroAverage, GibbsUnitMass };

struct PotentialPair {
  ScalarField u;        // (1/V) int e^{-u} omega = 1
  ScalarField u_tilde;  // int u_tilde omega = 0
  Field slope;          // u' at the nodes, shared by both normalizations
  double a = 0.0;       // (1/V) int u omega
  double b = 0.0;       // (1/V) int u e^{-u} omega
  double laplace_residual = 0.0;  // max_x | -Delta u - (R - 1) |

  const ScalarField& get(Normalization n) const {
    return n == Normalization::ZeroAverage ? u_tilde : u;
  }
};

/// Slope of the Ricci potential. Interior nodes divide directly; the two
/// endpoints use the L'Hopital value (phi'' + 1) / phi'.
Field ricci_potential_slope(const MetricProfile& profile, double endpoint_guard = 1e-6);

PotentialPair ricci_potential(const MetricProfile& profile, const ProfileTolerances& tol = {});

/// int f omega = 2 pi int f dx.
double measure_integral(const Grid& grid, const Field& f);
/// (1/V) int f omega.
double average(const Grid& grid, const Field& f);

struct Norms {
  double l1 = 0.0;
  double l2 = 0.0;
  double c0 = 0.0;
};

Norms norms(const Grid& grid, const Field& f);
/// Norms of |grad f| = sqrt(phi) |f'|; C^0 taken on the interpolant of |grad f|^2.
Norms gradient_norms(const MetricProfile& profile, const Field& f);

struct NormBundle {
  Norms u_tilde;
  Norms grad_u_tilde;
  Norms lap_u_tilde;
  Norms r_minus_n;
  Norms u;
  double min_r = 0.0;
};

/// Everything derivable from one profile. Built once per sample.
struct GeometrySnapshot {
  MetricProfile profile;
  PotentialPair potentials;
  ScalarField curvature;
  Field lap_u_tilde;  // Delta u_tilde (= Delta u)
  Field grad_sq;      // |grad u_tilde|^2
  NormBundle norms;
};

GeometrySnapshot make_snapshot(const MetricProfile& profile, const ProfileTolerances& tol = {});

// Initial data. All families are phi = (1 - x^2)/2 * h with h(+-1) = 1, so the
// boundary conditions hold identically.
MetricProfile round_profile(GridPtr grid);
/// h = 1 + beta (1 - x^2).
MetricProfile beta_profile(GridPtr grid, double beta);
/// h = 1 + sum_k c_k (1 - x^2) T_k(x).
MetricProfile chebyshev_profile(GridPtr grid, const std::vector<double>& coefficients);

/// C^0 distance to the round profile.
double distance_to_round(const MetricProfile& profile);

}  // namespace krf
