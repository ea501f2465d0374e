#pragma once

// Shared fixtures and independent oracles for the test suite. Nothing here
// calls into the library's numerical kernels; the exponential comes from
// Eigen's unsupported MatrixFunctions module.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/ingest.hpp"

namespace tcs::test {

using Rng = std::mt19937_64;

inline constexpr double kPi = 3.141592653589793;

inline Matrix diagonal() {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << -1.0, 0.5, -3.0;
  return a;
}

inline Matrix rotor() {
  Matrix a(3, 3);
  a << 0, 1, -1,
      -1, 0, 0,
      -1, 0, 0;
  return a;
}

// phi_gamma(T) = (e^{2 gamma T} - 1) / (2 gamma): Gramian of x' = gamma x.
inline double scalar_gramian(double gamma, double horizon) {
  return std::expm1(2.0 * gamma * horizon) / (2.0 * gamma);
}

// Rotor Gramians in closed form, integrated from exp(At) by hand.
inline Matrix rotor_w1(double t) {
  Matrix w(2, 2);
  w << t, -t * t / 2, -t * t / 2, t * t * t / 3;
  return w;
}
inline Matrix rotor_w2(double t) {
  // Column 2 of exp(At) restricted to rows 1..2 is (t, 1 - t^2/2).
  Matrix w(2, 2);
  const double t3 = t * t * t, t5 = t3 * t * t;
  w << t3 / 3, t * t / 2 - t * t * t * t / 8, t * t / 2 - t * t * t * t / 8, t - t3 / 3 + t5 / 20;
  return w;
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

// Random matrix shifted so that its spectral abscissa is about -shift.
inline Matrix random_stable(Rng& rng, Index n, double shift = 0.5) {
  Matrix a = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
  const double abscissa = a.eigenvalues().real().maxCoeff();
  a.diagonal().array() -= abscissa + shift;
  return a;
}

// Canonical system whose target block is weakly coupled to the rest
// (||A12|| small relative to the diagonal blocks).
inline Matrix random_hierarchical(Rng& rng, Index n, Index m, double coupling) {
  Matrix a = random_stable(rng, n);
  a.topRightCorner(m, n - m) *= coupling;
  a.bottomLeftCorner(n - m, m) *= coupling;
  return a;
}

inline Matrix random_connectivity(Rng& rng, Index n, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix c = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && u(rng) < density) c(i, j) = u(rng);
  return c;
}

inline Vector random_simplex(Rng& rng, Index m) {
  std::exponential_distribution<double> ex(1.0);
  Vector p(m);
  for (Index i = 0; i < m; ++i) p(i) = ex(rng);
  return p / p.sum();
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_diff(const Matrix& got, const Matrix& want) {
  return max_abs(got - want) / std::max(max_abs(want), 1e-300);
}

/// Output Gramians W_i = C W~_i C^T by composite Simpson with interval
/// doubling until successive results agree to `rtol`; every node evaluates
/// exp(A t) from scratch.
inline std::vector<Matrix> oracle_gramians(const Matrix& a, Index m, double horizon, double rtol = 1e-10) {
  auto simpson = [&](int intervals) {
    std::vector<Matrix> acc(static_cast<std::size_t>(m), Matrix::Zero(m, m));
    const double h = horizon / intervals;
    for (int k = 0; k <= intervals; ++k) {
      const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      const Matrix e = (a * (k * h)).exp();
      for (Index i = 0; i < m; ++i) {
        const Vector col = e.col(i).head(m);
        acc[static_cast<std::size_t>(i)] += w * col * col.transpose();
      }
    }
    for (auto& x : acc) x *= h / 3.0;
    return acc;
  };
  int intervals = 16;
  std::vector<Matrix> prev = simpson(intervals);
  while (true) {
    intervals *= 2;
    std::vector<Matrix> cur = simpson(intervals);
    double worst = 0.0;
    for (Index i = 0; i < m; ++i)
      worst = std::max(worst, rel_diff(cur[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>(i)]));
    if (worst <= rtol || intervals >= (1 << 16)) return cur;
    prev = std::move(cur);
  }
}

/// Euclidean projection onto the simplex by sorting (threshold form).
inline Vector sort_projection(const Vector& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

/// Central differences of a scalar function along each coordinate.
inline Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Direct W(p) from a list of Gramians, kept separate from the library's assemble().
inline Matrix weighted_sum(const std::vector<Matrix>& ws, const Vector& p) {
  Matrix w = Matrix::Zero(ws.front().rows(), ws.front().cols());
  for (std::size_t i = 0; i < ws.size(); ++i) w += p(static_cast<Index>(i)) * ws[i];
  return w;
}

inline double oracle_vcs(const std::vector<Matrix>& ws, const Vector& p) {
  return -std::log(weighted_sum(ws, p).determinant());
}

inline double oracle_aecs(const std::vector<Matrix>& ws, const Vector& p) {
  return weighted_sum(ws, p).inverse().trace();
}

/// Seeded synthetic cohort of Laplacian-ready connectivity matrices.
// Tractography-style cohort: row i holds connection probabilities from node i
// (sparse, normalized to sum 1), drawn toward a node attractiveness profile
// shared by all subjects.
inline std::vector<Connectivity> synthetic_cohort(std::uint64_t seed, int subjects, Index n) {
  Rng rng(seed);
  std::lognormal_distribution<double> attract(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector profile(n);
  for (Index i = 0; i < n; ++i) profile(i) = attract(rng);
  std::vector<Connectivity> out;
  for (int s = 0; s < subjects; ++s) {
    Connectivity c;
    c.matrix = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j)
        if (i != j && u(rng) < 0.3) c.matrix(i, j) = profile(j) * (0.5 + u(rng));
      const double total = c.matrix.row(i).sum();
      if (total > 0.0) c.matrix.row(i) /= total;
    }
    c.subject_id = "subject_" + std::to_string(s + 1);
    c.labels = default_labels(n);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace tcs::test
