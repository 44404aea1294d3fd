#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>

namespace krf {

using Field = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Exponential damping of the upper part of the Chebyshev spectrum.
/// Modes k <= cutoff * N are untouched; above it the coefficient is scaled by
/// exp(-strength * s^order) with s running from 0 to 1 over the damped band.
struct FilterSpec {
  double strength = 36.0;
  int order = 8;
  double cutoff = 2.0 / 3.0;
};

/// Chebyshev–Gauss–Lobatto collocation grid on [-1, 1], nodes ascending.
///
/// Holds dense first/second differentiation matrices, Clenshaw–Curtis weights,
/// the values-to-coefficients transform and an integration operator whose
/// result vanishes at x = -1. Immutable once built.
class Grid {
 public:
  static constexpr int kMinN = 8;
  static constexpr int kMaxN = 1024;

  int N() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) + 1; }

  const Field& nodes() const { return nodes_; }
  const Matrix& d1() const { return d1_; }
  const Matrix& d2() const { return d2_; }
  const Field& weights() const { return weights_; }
  const Field& bary_weights() const { return bary_; }
  const Matrix& integration() const { return integ_; }
  const Matrix& to_coefficients() const { return to_coef_; }

  /// Values-to-values filter operator; empty optional when built without one.
  const std::optional<Matrix>& filter() const { return filter_; }

  int oversampling() const { return oversampling_; }

  Field derivative(const Field& f) const { return d1_ * f; }
  Field second_derivative(const Field& f) const { return d2_ * f; }

  /// Clenshaw–Curtis quadrature of f over [-1, 1].
  double integrate(const Field& f) const { return weights_.dot(f); }

  /// Spectral antiderivative with value 0 at x = -1.
  Field antiderivative(const Field& f) const { return integ_ * f; }

  Field coefficients(const Field& f) const { return to_coef_ * f; }

 private:
  friend std::shared_ptr<const Grid> build_grid(int N, std::optional<FilterSpec> filter,
                                                int oversampling);
  Grid() = default;

  int n_ = 0;
  int oversampling_ = 8;
  Field nodes_;
  Matrix d1_;
  Matrix d2_;
  Field weights_;
  Field bary_;
  Matrix integ_;
  Matrix to_coef_;
  std::optional<Matrix> filter_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Throws std::invalid_argument unless 8 <= N <= 1024.
GridPtr build_grid(int N, std::optional<FilterSpec> filter = std::nullopt,
                   int oversampling = 8);

/// Barycentric evaluation of the degree-N interpolant at x in [-1, 1].
double interpolate(const Grid& grid, const Field& field, double x);

/// Evaluates the interpolant through Chebyshev coefficients (Clenshaw).
double evaluate_coefficients(const Field& coefficients, double x);

/// max |interpolant| over the oversampled Chebyshev mesh (nodes included).
double c0_norm(const Grid& grid, const Field& field);

/// Largest value of the interpolant over the oversampled mesh (signed).
double max_value(const Grid& grid, const Field& field);
/// Smallest value of the interpolant over the oversampled mesh (signed).
double min_value(const Grid& grid, const Field& field);

/// Field sampled from a callable at the grid nodes.
template <class Fn>
Field sample(const Grid& grid, Fn&& fn) {
  Field out(grid.size());
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = fn(grid.nodes()[j]);
  return out;
}

}  // namespace krf
