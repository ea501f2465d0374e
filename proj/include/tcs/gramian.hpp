#pragma once

// Per-node output controllability Gramians
//   W_i(T) = C ( int_0^T exp(At) e_i e_i^T exp(A^T t) dt ) C^T,   i = 1..m,
// for the canonical selector C = (I_m 0), their reduced counterparts built
// from A11 alone, and the affine assembly W(p,T) = sum_i p_i W_i(T).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/detail/parallel.hpp"
#include "tcs/detail/simpson.hpp"
#include "tcs/errors.hpp"
#include "tcs/expm.hpp"

namespace tcs {

enum class GramianFlavor { full_output, reduced };
enum class GramianMethod { block_exponential, quadrature };

inline const char* to_string(GramianFlavor f) {
  return f == GramianFlavor::full_output ? "full-output" : "reduced";
}
inline const char* to_string(GramianMethod m) {
  return m == GramianMethod::block_exponential ? "block-exp" : "quadrature";
}

inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kRankThreshold = 1e-10;

struct GramianOptions {
  GramianMethod method = GramianMethod::block_exponential;
  unsigned jobs = 1;
  double quadrature_rtol = 1e-10;
  std::int64_t quadrature_max_intervals = std::int64_t{1} << 20;
};

struct GramianSet {
  std::vector<Matrix> gramians;
  double horizon = 0.0;
  GramianFlavor flavor = GramianFlavor::full_output;
  GramianMethod method = GramianMethod::block_exponential;
  double tolerance = 0.0;  // estimated relative accuracy

  Index m() const noexcept { return static_cast<Index>(gramians.size()); }
};

inline Matrix symmetrized(const Matrix& x) { return 0.5 * (x + x.transpose()); }

namespace detail {

inline void check_horizon(double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("horizon T must be finite and positive, got " + std::to_string(horizon));
}

// State Gramian int_0^h exp(At) e_i e_i^T exp(A^T t) dt from the augmented
// exponential exp([[-A, e_i e_i^T], [0, A^T]] h) = [[F11, F12], [0, F22]],
// read off as F22^T F12.
inline Matrix augmented_step_gramian(const Matrix& a, Index i, double h) {
  const Index n = a.rows();
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = -a;
  aug(i, n + i) = 1.0;
  aug.bottomRightCorner(n, n) = a.transpose();
  const Matrix f = matrix_exponential(aug, h);
  return symmetrized(f.bottomRightCorner(n, n).transpose() * f.topRightCorner(n, n));
}

// Output Gramians of the first m coordinates by the augmented exponential on a
// short step, extended to the full horizon by repeated doubling
//   W(2s) = W(s) + exp(As) W(s) exp(A^T s).
inline GramianSet block_exponential_gramians(const Matrix& a, Index m, double horizon,
                                             unsigned jobs) {
  const Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int doublings = 0;
  if (norm1 * horizon > 0.5)
    doublings = static_cast<int>(std::ceil(std::log2(norm1 * horizon / 0.5)));
  doublings = std::min(doublings, 200);
  const double step = std::ldexp(horizon, -doublings);

  std::vector<Matrix> propagators;
  propagators.reserve(static_cast<std::size_t>(doublings));
  if (doublings > 0) {
    propagators.push_back(matrix_exponential(a, step));
    for (int k = 1; k < doublings; ++k) propagators.push_back(propagators.back() * propagators.back());
  }

  GramianSet out;
  out.gramians.resize(static_cast<std::size_t>(m));
  parallel_for(static_cast<std::size_t>(m), jobs, [&](std::size_t i) {
    Matrix w = augmented_step_gramian(a, static_cast<Index>(i), step);
    for (const Matrix& e : propagators) w = symmetrized(w + e * w * e.transpose());
    out.gramians[i] = symmetrized(w.topLeftCorner(m, m));
  });
  out.horizon = horizon;
  out.method = GramianMethod::block_exponential;
  out.tolerance = static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                  static_cast<double>(doublings + 1);
  return out;
}

// Output Gramians by composite Simpson quadrature: P(t) = C exp(At) is
// propagated along each grid and all m rank-one integrands P e_i e_i^T P^T are
// accumulated in one pass, in fixed node order.
inline GramianSet quadrature_gramians(const Matrix& a, Index m, double horizon,
                                      const GramianOptions& opt) {
  auto sum_nodes = [&](double t0, double dt, std::int64_t count) {
    Stack acc(static_cast<std::size_t>(m), Matrix::Zero(m, m));
    Matrix p = matrix_exponential(a, t0).topRows(m);
    const Matrix step = matrix_exponential(a, dt);
    for (std::int64_t k = 0; k < count; ++k) {
      if (k > 0) p = p * step;
      for (Index i = 0; i < m; ++i) acc[static_cast<std::size_t>(i)].noalias() += p.col(i) * p.col(i).transpose();
    }
    return acc;
  };
  SimpsonOptions sopt;
  sopt.rtol = opt.quadrature_rtol;
  sopt.max_intervals = opt.quadrature_max_intervals;
  SimpsonResult res = simpson(sum_nodes, horizon, sopt);

  GramianSet out;
  out.gramians.reserve(res.value.size());
  for (auto& w : res.value) out.gramians.push_back(symmetrized(w));
  out.horizon = horizon;
  out.method = GramianMethod::quadrature;
  out.tolerance = std::max(res.residual / 15.0, std::numeric_limits<double>::epsilon());
  return out;
}

inline GramianSet gramians_for(const Matrix& a, Index m, double horizon, const GramianOptions& opt) {
  check_horizon(horizon);
  if (!a.allFinite()) throw ValidationError("system matrix has non-finite entries");
  return opt.method == GramianMethod::block_exponential
             ? block_exponential_gramians(a, m, horizon, opt.jobs)
             : quadrature_gramians(a, m, horizon, opt);
}

}  // namespace detail

/// W_1(T), ..., W_m(T) of the full system, in canonical target order.
inline GramianSet output_gramian_set(const CanonicalSystem& canon, double horizon,
                                     const GramianOptions& opt = {}) {
  // With A12 = 0 the target rows of exp(At) are (exp(A11 t), 0).
  const bool decoupled = canon.a12.size() == 0 || (canon.a12.array() == 0.0).all();
  GramianSet s = decoupled ? detail::gramians_for(canon.a11, canon.m(), horizon, opt)
                           : detail::gramians_for(canon.assembled(), canon.m(), horizon, opt);
  s.flavor = GramianFlavor::full_output;
  return s;
}

/// W_{1,red}(T), ..., W_{m,red}(T) of the reduced system x' = A11 x.
inline GramianSet reduced_gramian_set(const CanonicalSystem& canon, double horizon,
                                      const GramianOptions& opt = {}) {
  GramianSet s = detail::gramians_for(canon.a11, canon.m(), horizon, opt);
  s.flavor = GramianFlavor::reduced;
  return s;
}

/// W(p,T) = sum_i p_i W_i(T).
inline Matrix assemble(const Vector& p, const GramianSet& gset) {
  if (p.size() != gset.m())
    throw ValidationError("weight vector has length " + std::to_string(p.size()) +
                          ", expected " + std::to_string(gset.m()));
  if (!p.allFinite()) throw ValidationError("weight vector has non-finite entries");
  const Index m = gset.m();
  Matrix w = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i) w += p(i) * gset.gramians[static_cast<std::size_t>(i)];
  return w;
}

struct RankResult {
  Index rank = 0;
  bool full_row_rank = false;
  double smallest_singular_value = 0.0;
};

/// Rank of (CB, CAB, ..., CA^{n-1}B) with unit input weights on `support`
/// (0-based canonical target indices). A is rescaled by its norm first; this
/// multiplies each block by a positive constant and leaves the rank unchanged.
inline RankResult output_controllability_rank(const CanonicalSystem& canon,
                                              const std::vector<Index>& support) {
  const Index m = canon.m(), n = canon.n();
  if (support.empty()) throw ValidationError("support must be nonempty");
  for (Index j : support)
    if (j < 0 || j >= m)
      throw ValidationError("support index " + std::to_string(j + 1) + " out of range [1, " +
                            std::to_string(m) + "]");

  Matrix a = canon.assembled();
  const double scale = a.cwiseAbs().colwise().sum().maxCoeff();
  if (scale > 0.0) a /= scale;

  const Index k = static_cast<Index>(support.size());
  Matrix b = Matrix::Zero(n, k);
  for (Index c = 0; c < k; ++c) b(support[static_cast<std::size_t>(c)], c) = 1.0;

  Matrix krylov(m, n * k);
  Matrix block = b;  // A^j B
  for (Index j = 0; j < n; ++j) {
    krylov.middleCols(j * k, k) = block.topRows(m);
    block = a * block;
  }
  Eigen::JacobiSVD<Matrix> svd(krylov);
  const Vector& sv = svd.singularValues();
  RankResult r;
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > kRankThreshold * smax) ++r.rank;
  r.full_row_rank = r.rank == m;
  r.smallest_singular_value = sv.size() >= m ? sv(m - 1) : 0.0;
  return r;
}

}  // namespace tcs
