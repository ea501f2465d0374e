#pragma once

// Target controllability scores: minimize h_T(p) over the probability simplex,
// where h_T is either
//   VCS:  f_T(p) = -log det W(p,T)
//   AECS: g_T(p) = tr(W(p,T)^{-1})
// by projected gradient descent with an Armijo rule along the projection arc.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/detail/simpson.hpp"
#include "tcs/errors.hpp"
#include "tcs/expm.hpp"
#include "tcs/gramian.hpp"

namespace tcs {

enum class ScoreKind { vcs, aecs };

inline const char* to_string(ScoreKind k) { return k == ScoreKind::vcs ? "vcs" : "aecs"; }

inline constexpr double kFeasibilityTolerance = 1e-12;
inline constexpr double kUniquenessThreshold = 1e-10;
inline constexpr int kMaxBacktracks = 60;
// Projected-gradient residual required for a solve to count as converged.
inline constexpr double kStationarityTolerance = 1e-6;

struct SolverOptions {
  double sigma = 1e-4;
  double rho = 0.5;
  double alpha0 = 1.0;
  double epsilon_stop = 1e-10;
  std::int64_t max_iters = 100000;

  void validate() const {
    if (!(sigma > 0.0 && sigma < 1.0)) throw ValidationError("sigma must lie in (0,1)");
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("rho must lie in (0,1)");
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ValidationError("alpha0 must be positive");
    if (!(epsilon_stop >= 0.0)) throw ValidationError("epsilon_stop must be nonnegative");
    if (max_iters <= 0) throw ValidationError("max_iters must be positive");
  }
};

enum class Verdict { unique, indeterminate };

inline const char* to_string(Verdict v) { return v == Verdict::unique ? "unique" : "indeterminate"; }

struct UniquenessCertificate {
  double smallest_normalized_singular_value = 0.0;
  double det_r = 0.0;
  Verdict verdict = Verdict::indeterminate;
};

struct ScoreResult {
  Vector p_star;
  double objective_value = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
  bool stalled = false;  // stopped on a line search that could not decrease h
  std::vector<double> objective_trace;
  double feasibility_margin = 0.0;  // lambda_min(W(p*,T))
  double stationarity_residual = 0.0;  // ||p* - Proj(p* - grad h(p*))||
  UniquenessCertificate uniqueness;
};

// ---------------------------------------------------------------------------
// Feasibility and objective evaluation

namespace detail {

struct Factorized {
  Eigen::LLT<Matrix> llt;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool feasible = false;
};

inline Factorized factorize(const Matrix& w) {
  Factorized f;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w, Eigen::EigenvaluesOnly);
  f.lambda_min = eig.eigenvalues()(0);
  f.lambda_max = eig.eigenvalues()(eig.eigenvalues().size() - 1);
  f.llt.compute(w);
  f.feasible = f.llt.info() == Eigen::Success && f.lambda_max > 0.0 &&
               f.lambda_min > kFeasibilityTolerance * f.lambda_max;
  return f;
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

inline double objective_from(ScoreKind kind, const Factorized& f) {
  if (kind == ScoreKind::vcs)
    return -2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
  const Index m = f.llt.matrixLLT().rows();
  return f.llt.solve(Matrix::Identity(m, m)).trace();
}

// h(p + d) - h(p) from dW = W(p + d) - W(p), without subtracting two values of
// h (which loses the difference to roundoff near a minimizer).
inline double objective_change(ScoreKind kind, const Factorized& at, const Factorized& trial, const Matrix& dw) {
  const Index m = dw.rows();
  if (kind == ScoreKind::vcs) {
    const auto l = at.llt.matrixL();
    const Matrix half = l.solve(dw);
    const Matrix s = l.solve(half.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    return -eig.eigenvalues().array().log1p().sum();
  }
  const Matrix trial_inv = trial.llt.solve(Matrix::Identity(m, m));
  return -frobenius_dot(trial_inv * dw, at.llt.solve(Matrix::Identity(m, m)));
}

// sum(x) - 1 without rounding the sum to double first.
inline double sum_excess(const Vector& x) {
  double hi = 0.0, lo = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double t = hi + x(i);
    lo += std::abs(hi) >= std::abs(x(i)) ? (hi - t) + x(i) : (x(i) - t) + hi;
    hi = t;
  }
  return (hi - 1.0) + lo;
}

// h(q / sum q) - h(p / sum p). Projected points miss the simplex by a few ulps,
// and with |grad h| large that offset swamps the decrease near a minimizer;
// homogeneity of h removes it exactly.
inline double simplex_change(ScoreKind kind, const Vector& p, const Vector& q, double value_at_p,
                             const Factorized& at, const Factorized& at_q, const GramianSet& gset) {
  const double change = objective_change(kind, at, at_q, assemble(q - p, gset));
  const double e0 = sum_excess(p), e1 = sum_excess(q);
  if (kind == ScoreKind::vcs)
    return change + static_cast<double>(p.size()) * (std::log1p(e1) - std::log1p(e0));
  return change * (1.0 + e1) + (e1 - e0) * value_at_p;
}

}  // namespace detail

/// p lies in X_T (W(p,T) positive definite within the relative tolerance).
inline bool is_feasible(const Vector& p, const GramianSet& gset) {
  return detail::factorize(assemble(p, gset)).feasible;
}

/// h_T(p), or nullopt when p lies outside X_T.
inline std::optional<double> objective_value(ScoreKind kind, const Vector& p, const GramianSet& gset) {
  const detail::Factorized f = detail::factorize(assemble(p, gset));
  if (!f.feasible) return std::nullopt;
  return detail::objective_from(kind, f);
}

struct Evaluation {
  double value = 0.0;
  Vector gradient;
};

inline Evaluation evaluate(ScoreKind kind, const Vector& p, const GramianSet& gset) {
  const detail::Factorized f = detail::factorize(assemble(p, gset));
  if (!f.feasible)
    throw FeasibilityError("W(p,T) is not positive definite (lambda_min = " +
                               std::to_string(f.lambda_min) + ")",
                           f.lambda_min);
  const Index m = gset.m();
  const Matrix winv = f.llt.solve(Matrix::Identity(m, m));
  const Matrix weight = kind == ScoreKind::vcs ? winv : Matrix(winv * winv);
  Evaluation e;
  e.value = detail::objective_from(kind, f);
  e.gradient.resize(m);
  for (Index i = 0; i < m; ++i)
    e.gradient(i) = -detail::frobenius_dot(weight, gset.gramians[static_cast<std::size_t>(i)]);
  return e;
}

inline Matrix hessian(ScoreKind kind, const Vector& p, const GramianSet& gset) {
  const detail::Factorized f = detail::factorize(assemble(p, gset));
  if (!f.feasible)
    throw FeasibilityError("W(p,T) is not positive definite (lambda_min = " +
                               std::to_string(f.lambda_min) + ")",
                           f.lambda_min);
  const Index m = gset.m();
  const Matrix winv = f.llt.solve(Matrix::Identity(m, m));
  std::vector<Matrix> left(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Matrix& wi = gset.gramians[static_cast<std::size_t>(i)];
    if (kind == ScoreKind::vcs) {
      left[static_cast<std::size_t>(i)] = winv * wi * winv;
    } else {
      const Matrix n = winv * winv * wi * winv;
      left[static_cast<std::size_t>(i)] = n + n.transpose();
    }
  }
  Matrix h(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j <= i; ++j) {
      h(i, j) = detail::frobenius_dot(left[static_cast<std::size_t>(i)],
                                      gset.gramians[static_cast<std::size_t>(j)]);
      h(j, i) = h(i, j);
    }
  return h;
}

// ---------------------------------------------------------------------------
// Simplex projection

/// Euclidean projection onto {x >= 0, sum x = 1}, by Condat's scan: a single
/// pass builds a candidate active set with a running threshold, a cleanup pass
/// drops entries that fell below it.
inline Vector simplex_project(const Vector& v) {
  const Index m = v.size();
  if (m == 0) throw ValidationError("cannot project an empty vector");
  if (!v.allFinite()) throw ValidationError("projection input has non-finite entries");

  std::vector<double> active;
  std::vector<double> deferred;
  active.reserve(static_cast<std::size_t>(m));
  active.push_back(v(0));
  double rho = v(0) - 1.0;
  for (Index i = 1; i < m; ++i) {
    const double y = v(i);
    if (y > rho) {
      rho += (y - rho) / static_cast<double>(active.size() + 1);
      if (rho > y - 1.0) {
        active.push_back(y);
      } else {
        deferred.insert(deferred.end(), active.begin(), active.end());
        active.assign(1, y);
        rho = y - 1.0;
      }
    }
  }
  for (double y : deferred) {
    if (y > rho) {
      active.push_back(y);
      rho += (y - rho) / static_cast<double>(active.size());
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < active.size();) {
      const double y = active[k];
      if (y <= rho) {
        active[k] = active.back();
        active.pop_back();
        rho += (rho - y) / static_cast<double>(active.size());
        changed = true;
      } else {
        ++k;
      }
    }
  }
  // Recompute the threshold from the final active set in one summation.
  const double tau =
      (std::accumulate(active.begin(), active.end(), 0.0) - 1.0) / static_cast<double>(active.size());
  return (v.array() - tau).cwiseMax(0.0).matrix();
}

// ---------------------------------------------------------------------------
// Armijo rule along the projection arc

struct ArmijoStep {
  double alpha = 0.0;
  Vector p_next;
  double value_next = 0.0;
  double change = 0.0;  // h(p_next) - h(p), evaluated without cancellation
};

inline ArmijoStep armijo_step(ScoreKind kind, const Vector& p, const Evaluation& at_p,
                              const GramianSet& gset, const SolverOptions& opt) {
  const detail::Factorized at = detail::factorize(assemble(p, gset));
  double alpha = opt.alpha0;
  for (int k = 0; k <= kMaxBacktracks; ++k, alpha *= opt.rho) {
    Vector trial = simplex_project(p - alpha * at_p.gradient);
    const detail::Factorized f = detail::factorize(assemble(trial, gset));
    if (!f.feasible) continue;
    const double change = detail::simplex_change(kind, p, trial, at_p.value, at, f, gset);
    const Vector centered = at_p.gradient.array() - at_p.gradient.mean();
    if (change <= opt.sigma * centered.dot(trial - p))
      return {alpha, std::move(trial), at_p.value + change, change};
  }
  throw LineSearchError("Armijo backtracking exceeded " + std::to_string(kMaxBacktracks) +
                        " reductions (stationary or ill-conditioned point)");
}

inline ArmijoStep armijo_step(ScoreKind kind, const Vector& p, const GramianSet& gset,
                              const SolverOptions& opt) {
  opt.validate();
  return armijo_step(kind, p, evaluate(kind, p, gset), gset, opt);
}

// ---------------------------------------------------------------------------
// Uniqueness certificate

namespace detail {

// Isometric vectorization of a symmetric matrix (upper triangle, off-diagonal
// entries scaled by sqrt(2)), so Euclidean geometry matches Frobenius.
inline Vector svec(const Matrix& w) {
  const Index m = w.rows();
  Vector out(m * (m + 1) / 2);
  Index k = 0;
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i <= j; ++i) out(k++) = i == j ? w(i, j) : std::sqrt(2.0) * w(i, j);
  return out;
}

inline double smallest_normalized_singular_value(const GramianSet& gset) {
  const Index m = gset.m();
  Matrix cols(m * (m + 1) / 2, m);
  for (Index i = 0; i < m; ++i) {
    const Matrix& w = gset.gramians[static_cast<std::size_t>(i)];
    const double nrm = w.norm();
    cols.col(i) = nrm > 0.0 ? Vector(svec(w) / nrm) : Vector(svec(w));
  }
  Eigen::JacobiSVD<Matrix> svd(cols);
  return svd.singularValues()(m - 1);
}

// R(T)_{ij} = int_0^T P_ij(t)^2 dt with P(t) = C exp(A t), by Simpson quadrature.
inline Matrix r_matrix(const Matrix& a, Index m, double horizon) {
  auto sum_nodes = [&](double t0, double dt, std::int64_t count) {
    Stack acc(1, Matrix::Zero(m, m));
    const Matrix step = matrix_exponential(a, dt);
    Matrix p = matrix_exponential(a, t0).topRows(m);
    for (std::int64_t k = 0; k < count; ++k) {
      if (k > 0) p = p * step;
      acc[0] += p.leftCols(m).cwiseAbs2();
    }
    return acc;
  };
  return simpson(sum_nodes, horizon).value[0];
}

}  // namespace detail

/// Linear-independence certificate for W_1..W_m. `canon` supplies the dynamics
/// for R(T): the full matrix for full-output sets, A11 for reduced sets.
inline UniquenessCertificate uniqueness_certificate(const GramianSet& gset,
                                                    const CanonicalSystem& canon) {
  if (gset.m() == 0) throw ValidationError("empty Gramian set");
  if (gset.m() != canon.m())
    throw ValidationError("Gramian set and canonical system disagree on m");
  UniquenessCertificate c;
  c.smallest_normalized_singular_value = detail::smallest_normalized_singular_value(gset);
  const Matrix a = gset.flavor == GramianFlavor::reduced ? canon.a11 : canon.assembled();
  c.det_r = detail::r_matrix(a, gset.m(), gset.horizon).determinant();
  c.verdict = c.smallest_normalized_singular_value > kUniquenessThreshold ? Verdict::unique
                                                                          : Verdict::indeterminate;
  return c;
}

/// Certificate without the dynamics: R(T) is read off the Gramian diagonals,
/// R_ij = (W_j)_ii, which is the same integral.
inline UniquenessCertificate uniqueness_certificate(const GramianSet& gset) {
  if (gset.m() == 0) throw ValidationError("empty Gramian set");
  const Index m = gset.m();
  Matrix r(m, m);
  for (Index j = 0; j < m; ++j) r.col(j) = gset.gramians[static_cast<std::size_t>(j)].diagonal();
  UniquenessCertificate c;
  c.smallest_normalized_singular_value = detail::smallest_normalized_singular_value(gset);
  c.det_r = r.determinant();
  c.verdict = c.smallest_normalized_singular_value > kUniquenessThreshold ? Verdict::unique
                                                                          : Verdict::indeterminate;
  return c;
}

// ---------------------------------------------------------------------------
// Solver

inline double stationarity_residual(ScoreKind kind, const Vector& p, const GramianSet& gset) {
  const Evaluation e = evaluate(kind, p, gset);
  return (p - simplex_project(p - e.gradient)).norm();
}

/// Projected gradient from the uniform point. Never throws on an exhausted
/// iteration budget; the result then carries converged = false.
inline ScoreResult solve_score(ScoreKind kind, const GramianSet& gset, const SolverOptions& opt = {},
                               const CanonicalSystem* canon = nullptr) {
  opt.validate();
  const Index m = gset.m();
  if (m == 0) throw ValidationError("empty Gramian set");

  ScoreResult r;
  Vector p = Vector::Constant(m, 1.0 / static_cast<double>(m));
  {
    const detail::Factorized f = detail::factorize(assemble(p, gset));
    if (!f.feasible)
      throw FeasibilityError("uniform start is infeasible (lambda_min = " +
                                 std::to_string(f.lambda_min) + ")",
                             f.lambda_min);
  }
  Evaluation e = evaluate(kind, p, gset);
  r.objective_trace.push_back(e.value);

  for (std::int64_t k = 0; k < opt.max_iters; ++k) {
    ArmijoStep step;
    try {
      step = armijo_step(kind, p, e, gset, opt);
    } catch (const LineSearchError&) {
      // Objective differences have sunk below roundoff.
      r.converged = (p - simplex_project(p - e.gradient)).norm() <= kStationarityTolerance;
      r.stalled = true;
      break;
    }
    const double move = (step.p_next - p).norm();
    p = std::move(step.p_next);
    e = evaluate(kind, p, gset);
    r.objective_trace.push_back(r.objective_trace.back() + step.change);
    r.iterations = k + 1;
    // A short step alone is not enough when h is stiff: the step length scales
    // like 1/curvature, so also require the projected-gradient residual.
    if (move <= opt.epsilon_stop && (p - simplex_project(p - e.gradient)).norm() <= kStationarityTolerance) {
      r.converged = true;
      break;
    }
  }
  r.p_star = p;
  r.objective_value = r.objective_trace.back();
  r.feasibility_margin = detail::factorize(assemble(p, gset)).lambda_min;
  r.stationarity_residual = (p - simplex_project(p - e.gradient)).norm();
  r.uniqueness = canon ? uniqueness_certificate(gset, *canon) : uniqueness_certificate(gset);
  return r;
}

}  // namespace tcs
