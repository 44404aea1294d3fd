#include "krf/specgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace krf {

namespace {

constexpr double kPi = std::numbers::pi;

// Ascending CGL node j of N, written so that x_{N-j} = -x_j bit for bit.
double cgl_node(int j, int N) {
  return std::sin(kPi * static_cast<double>(2 * j - N) / static_cast<double>(2 * N));
}

Matrix differentiation_matrix(int N) {
  const int n1 = N + 1;
  Matrix D = Matrix::Zero(n1, n1);
  auto c = [N](int i) { return (i == 0 || i == N) ? 2.0 : 1.0; };
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n1; ++j) {
      if (i == j) continue;
      // x_i - x_j via the product formula, which avoids cancellation near
      // the clustered endpoints.
      const double ti = kPi * (N - i) / N;
      const double tj = kPi * (N - j) / N;
      const double diff = -2.0 * std::sin(0.5 * (ti + tj)) * std::sin(0.5 * (ti - tj));
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      D(i, j) = c(i) / c(j) * sign / diff;
    }
  }
  // Negative-sum trick: rows annihilate constants exactly.
  for (int i = 0; i < n1; ++i) {
    double s = 0.0;
    for (int j = 0; j < n1; ++j)
      if (j != i) s += D(i, j);
    D(i, i) = -s;
  }
  return D;
}

// Second-derivative matrix from the first: off-diagonal entries by the
// Welfert recursion, diagonal by the negative-sum trick.
Matrix second_differentiation_matrix(int N, const Matrix& D) {
  const int n1 = N + 1;
  Matrix D2 = Matrix::Zero(n1, n1);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n1; ++j) {
      if (i == j) continue;
      const double ti = kPi * (N - i) / N;
      const double tj = kPi * (N - j) / N;
      const double diff = -2.0 * std::sin(0.5 * (ti + tj)) * std::sin(0.5 * (ti - tj));
      D2(i, j) = 2.0 * D(i, j) * (D(i, i) - 1.0 / diff);
    }
    double s = 0.0;
    for (int j = 0; j < n1; ++j)
      if (j != i) s += D2(i, j);
    D2(i, i) = -s;
  }
  return D2;
}

Field clenshaw_curtis(int N) {
  Field w = Field::Zero(N + 1);
  std::vector<double> v(static_cast<std::size_t>(N - 1), 1.0);
  auto theta = [N](int j) { return kPi * j / N; };
  if (N % 2 == 0) {
    w[0] = w[N] = 1.0 / (static_cast<double>(N) * N - 1.0);
    for (int k = 1; k < N / 2; ++k)
      for (int j = 1; j < N; ++j)
        v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
    for (int j = 1; j < N; ++j)
      v[j - 1] -= std::cos(N * theta(j)) / (static_cast<double>(N) * N - 1.0);
  } else {
    w[0] = w[N] = 1.0 / (static_cast<double>(N) * N);
    for (int k = 1; k <= (N - 1) / 2; ++k)
      for (int j = 1; j < N; ++j)
        v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < N; ++j) w[j] = 2.0 * v[j - 1] / N;
  // Theta runs over descending nodes; the weights are symmetric so the
  // ascending ordering is the same vector. Symmetrize against rounding.
  for (int j = 0; j <= N / 2; ++j) {
    const double s = 0.5 * (w[j] + w[N - j]);
    w[j] = w[N - j] = s;
  }
  return w;
}

// T_k(x_j) for ascending CGL nodes: x_j = -cos(pi j / N).
double chebyshev_at_node(int k, int j, int N) {
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  const long kj = static_cast<long>(k) * j % (2L * N);
  return sign * std::cos(kPi * static_cast<double>(kj) / N);
}

Matrix coefficient_transform(int N) {
  const int n1 = N + 1;
  Matrix C(n1, n1);
  for (int k = 0; k < n1; ++k) {
    const double ck = (k == 0 || k == N) ? 2.0 : 1.0;
    for (int j = 0; j < n1; ++j) {
      const double half = (j == 0 || j == N) ? 0.5 : 1.0;
      C(k, j) = 2.0 / (N * ck) * half * chebyshev_at_node(k, j, N);
    }
  }
  return C;
}

Matrix synthesis(int N, int kmax) {
  Matrix E(N + 1, kmax + 1);
  for (int j = 0; j <= N; ++j)
    for (int k = 0; k <= kmax; ++k) E(j, k) = chebyshev_at_node(k, j, N);
  return E;
}

Matrix integration_matrix(int N, const Matrix& to_coef) {
  // Coefficients a_0..a_N -> antiderivative coefficients b_0..b_{N+1}.
  const int n1 = N + 1;
  Matrix B = Matrix::Zero(N + 2, n1);
  for (int k = 1; k <= N + 1; ++k) {
    // b_k = (c_{k-1} a_{k-1} - a_{k+1}) / (2k), c_0 = 2.
    const double c_prev = (k - 1 == 0) ? 2.0 : 1.0;
    B(k, k - 1) += c_prev / (2.0 * k);
    if (k + 1 <= N) B(k, k + 1) -= 1.0 / (2.0 * k);
  }
  // b_0 chosen so the antiderivative vanishes at x = -1 (T_k(-1) = (-1)^k).
  for (int k = 1; k <= N + 1; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    B.row(0) -= sign * B.row(k);
  }
  return synthesis(N, N + 1) * B * to_coef;
}

Matrix filter_matrix(int N, const FilterSpec& spec, const Matrix& to_coef) {
  Field sigma = Field::Ones(N + 1);
  const double kc = spec.cutoff * N;
  for (int k = 0; k <= N; ++k) {
    if (k <= kc) continue;
    const double s = (k - kc) / (N - kc);
    sigma[k] = std::exp(-spec.strength * std::pow(s, spec.order));
  }
  return synthesis(N, N) * sigma.asDiagonal() * to_coef;
}

template <class Reduce>
double reduce_oversampled(const Grid& grid, const Field& field, double init, Reduce&& reduce) {
  double acc = init;
  for (Eigen::Index j = 0; j < field.size(); ++j) acc = reduce(acc, field[j]);
  const Field coef = grid.coefficients(field);
  const int M = grid.oversampling() * grid.N();
  for (int m = 0; m <= M; ++m) {
    if (m % grid.oversampling() == 0) continue;  // coincides with a node
    acc = reduce(acc, evaluate_coefficients(coef, cgl_node(m, M)));
  }
  return acc;
}

}  // namespace

GridPtr build_grid(int N, std::optional<FilterSpec> filter, int oversampling) {
  if (N < Grid::kMinN || N > Grid::kMaxN)
    throw std::invalid_argument("build_grid: N must lie in [8, 1024], got " + std::to_string(N));
  if (oversampling < 1)
    throw std::invalid_argument("build_grid: oversampling must be >= 1");

  auto grid = std::shared_ptr<Grid>(new Grid());
  grid->n_ = N;
  grid->oversampling_ = oversampling;
  grid->nodes_.resize(N + 1);
  for (int j = 0; j <= N; ++j) grid->nodes_[j] = cgl_node(j, N);
  grid->d1_ = differentiation_matrix(N);
  grid->d2_ = second_differentiation_matrix(N, grid->d1_);
  grid->weights_ = clenshaw_curtis(N);
  grid->bary_.resize(N + 1);
  for (int j = 0; j <= N; ++j)
    grid->bary_[j] = ((j % 2 == 0) ? 1.0 : -1.0) * ((j == 0 || j == N) ? 0.5 : 1.0);
  grid->to_coef_ = coefficient_transform(N);
  grid->integ_ = integration_matrix(N, grid->to_coef_);
  if (filter) grid->filter_ = filter_matrix(N, *filter, grid->to_coef_);
  return grid;
}

double interpolate(const Grid& grid, const Field& field, double x) {
  if (!(x >= -1.0 && x <= 1.0))
    throw std::invalid_argument("interpolate: abscissa outside [-1, 1]");
  const Field& xs = grid.nodes();
  const Field& w = grid.bary_weights();
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index j = 0; j < xs.size(); ++j) {
    const double d = x - xs[j];
    if (d == 0.0) return field[j];
    const double t = w[j] / d;
    num += t * field[j];
    den += t;
  }
  return num / den;
}

double evaluate_coefficients(const Field& coefficients, double x) {
  double b1 = 0.0;
  double b2 = 0.0;
  for (Eigen::Index k = coefficients.size() - 1; k >= 1; --k) {
    const double b0 = coefficients[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return coefficients[0] + x * b1 - b2;
}

double c0_norm(const Grid& grid, const Field& field) {
  return reduce_oversampled(grid, field, 0.0,
                            [](double acc, double v) { return std::max(acc, std::abs(v)); });
}

double max_value(const Grid& grid, const Field& field) {
  return reduce_oversampled(grid, field, -std::numeric_limits<double>::infinity(),
                            [](double acc, double v) { return std::max(acc, v); });
}

double min_value(const Grid& grid, const Field& field) {
  return reduce_oversampled(grid, field, std::numeric_limits<double>::infinity(),
                            [](double acc, double v) { return std::min(acc, v); });
}

}  // namespace krf
