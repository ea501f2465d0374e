#pragma once

// Reduced-model error machinery: logarithmic norms, the horizon prefactor
// Phi_mu(T), Gramian gaps Delta W_i = W_{i,red} - W_i, the relative errors
// delta_T(p) and delta*, and the comparison between target and reduced scores.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tcs/core_model.hpp"
#include "tcs/detail/simpson.hpp"
#include "tcs/errors.hpp"
#include "tcs/expm.hpp"
#include "tcs/gramian.hpp"
#include "tcs/scores.hpp"

namespace tcs {

inline constexpr double kPhiSwitch = 1e-6;        // |mu| T below this uses the T^2 branch
inline constexpr double kStrongConvexityFloor = 1e-14;
inline constexpr int kStrongConvexitySamples = 11;
inline constexpr double kLaplacianLogNormSlack = 1e-8;

/// mu(M) = lambda_max((M + M^T) / 2).
inline double log_norm(const Matrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("log_norm: matrix is not square");
  if (!m.allFinite()) throw ValidationError("log_norm: non-finite entries");
  if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(m.rows() - 1);
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

struct PhiValue {
  double value = 0.0;
  bool overflow = false;
};

/// Phi_mu(T) = (e^{2 mu T}(2 mu T - 1) + 1) / (2 mu^2), or T^2 at mu = 0.
/// With x = 2 mu T this is 2 T^2 (x e^x - e^x + 1) / x^2, evaluated by its
/// Taylor series for small |x| and through expm1 otherwise; the direct form
/// cancels catastrophically near x = 0.
inline PhiValue phi(double mu, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("phi: horizon must be finite and positive");
  if (!std::isfinite(mu)) throw ValidationError("phi: mu must be finite");
  const double t2 = horizon * horizon;
  if (std::abs(mu) * horizon < kPhiSwitch) return {t2, false};
  const double x = 2.0 * mu * horizon;
  if (std::abs(x) < 0.5) {
    // (x e^x - e^x + 1) / x^2 = sum_{k>=2} (k-1) x^{k-2} / k!
    double term = 0.5, sum = 0.0;
    for (int k = 2; k < 24; ++k) {
      sum += (k - 1) * term;
      term *= x / (k + 1);
    }
    return {2.0 * t2 * sum, false};
  }
  // x e^x - e^x + 1 = x * expm1(x) - (expm1(x) - x)
  const double em1 = std::expm1(x);
  const double numer = x * em1 - (em1 - x);
  const double value = t2 * 2.0 * numer / (x * x);
  if (!std::isfinite(value)) return {std::numeric_limits<double>::infinity(), true};
  return {value, false};
}

struct BoundInputs {
  double mu = 0.0;         // mu(A)
  double mu11 = 0.0;       // mu(A11)
  double a12_norm = 0.0;   // ||A12||_2
  double horizon = 0.0;

  static BoundInputs from(const CanonicalSystem& canon, double horizon) {
    detail::check_horizon(horizon);
    return {log_norm(canon.assembled()), log_norm(canon.a11), spectral_norm(canon.a12), horizon};
  }
  double epsilon_bound() const {
    if (a12_norm == 0.0) return 0.0;
    return phi(mu, horizon).value * a12_norm;
  }
};

struct GramianGap {
  std::vector<Matrix> delta_w;
  std::vector<double> delta_w_norms;
};

inline GramianGap gramian_gap(const GramianSet& full, const GramianSet& reduced) {
  if (full.m() != reduced.m())
    throw ValidationError("Gramian sets differ in size: " + std::to_string(full.m()) + " vs " +
                          std::to_string(reduced.m()));
  if (full.horizon != reduced.horizon)
    throw ValidationError("Gramian sets differ in horizon");
  GramianGap g;
  for (std::size_t i = 0; i < full.gramians.size(); ++i) {
    g.delta_w.push_back(reduced.gramians[i] - full.gramians[i]);
    g.delta_w_norms.push_back(spectral_norm(g.delta_w.back()));
  }
  return g;
}

/// Delta W_i(T) through the variation-of-constants representation
///   X(t) = exp(A11 t) - C exp(At) C^T = int_0^t exp(A11 (t-s)) E exp(As) C^T ds,
///   Delta W_i = int_0^T [X(t) e_i e_i^T exp(A11^T t) + C exp(At) C^T e_i e_i^T X(t)^T] dt,
/// with E = (0  -A12). The inner integral is the top-right block of
/// exp([[A11, E], [0, A]] t); the outer one uses Simpson quadrature.
inline std::vector<Matrix> gramian_gap_by_variation_of_constants(const CanonicalSystem& canon,
                                                                 double horizon,
                                                                 double rtol = 1e-10) {
  detail::check_horizon(horizon);
  const Index m = canon.m(), n = canon.n();
  const Matrix a = canon.assembled();
  Matrix e = Matrix::Zero(m, n);
  e.rightCols(n - m) = -canon.a12;
  Matrix coupled = Matrix::Zero(m + n, m + n);
  coupled.topLeftCorner(m, m) = canon.a11;
  coupled.topRightCorner(m, n) = e;
  coupled.bottomRightCorner(n, n) = a;

  auto sum_nodes = [&](double t0, double dt, std::int64_t count) {
    detail::Stack acc(static_cast<std::size_t>(m), Matrix::Zero(m, m));
    const Matrix step = matrix_exponential(coupled, dt);
    Matrix big = matrix_exponential(coupled, t0);
    for (std::int64_t k = 0; k < count; ++k) {
      if (k > 0) big = big * step;
      const Matrix e11 = big.topLeftCorner(m, m);                     // exp(A11 t)
      const Matrix x = big.topRightCorner(m, n).leftCols(m);          // X(t)
      const Matrix cec = big.bottomRightCorner(n, n).topLeftCorner(m, m);  // C exp(At) C^T
      for (Index i = 0; i < m; ++i) {
        const Matrix term = x.col(i) * e11.col(i).transpose();
        acc[static_cast<std::size_t>(i)] += term + (cec.col(i) * x.col(i).transpose());
      }
    }
    return acc;
  };
  detail::SimpsonOptions opt;
  opt.rtol = rtol;
  return detail::simpson(sum_nodes, horizon, opt).value;
}

struct DeltaQuantities {
  std::vector<double> delta_at;    // delta_T(p) for each p in Z
  std::vector<double> epsilon_at;  // epsilon_T(p) = sum_i p_i ||Delta W_i||
  double delta_star = 0.0;
  double margin = 0.0;             // min over Z of lambda_min(W(p,T))
};

inline DeltaQuantities delta_quantities(const GramianSet& full, const GramianGap& gap,
                                        const std::vector<Vector>& z, const BoundInputs& bounds) {
  if (z.empty()) throw ValidationError("Z must be nonempty");
  DeltaQuantities d;
  d.margin = std::numeric_limits<double>::infinity();
  for (const Vector& p : z) {
    const detail::Factorized f = detail::factorize(assemble(p, full));
    if (!f.feasible)
      throw FeasibilityError("member of Z lies outside X_T (lambda_min = " +
                                 std::to_string(f.lambda_min) + ")",
                             f.lambda_min);
    double eps = 0.0;
    for (Index i = 0; i < p.size(); ++i) eps += p(i) * gap.delta_w_norms[static_cast<std::size_t>(i)];
    d.epsilon_at.push_back(eps);
    d.delta_at.push_back(eps / f.lambda_min);
    d.margin = std::min(d.margin, f.lambda_min);
  }
  d.delta_star = bounds.epsilon_bound() / d.margin;
  return d;
}

// ---------------------------------------------------------------------------
// Target vs reduced comparison

struct SandwichCheck {
  // Worst slack over Z of each inequality (>= 0 means it holds).
  double lower_slack = 0.0;
  std::optional<double> upper_slack;  // only when delta* < 1
};

struct ComparisonReport {
  ScoreKind kind = ScoreKind::vcs;
  double horizon = 0.0;
  ScoreResult target;
  ScoreResult reduced;
  Vector p_target;
  Vector p_reduced;
  double diff_norm = 0.0;
  BoundInputs bounds;
  std::vector<double> delta_w_norms;
  double epsilon_t = 0.0;        // max over Z of epsilon_T(p)
  double epsilon_bound = 0.0;    // Phi_mu(T) ||A12||
  bool phi_overflow = false;
  double delta_star = std::numeric_limits<double>::infinity();
  double margin = 0.0;
  bool reduced_feasible_in_full = false;
  bool bounds_applicable = false;  // delta* < 1 and p_red in X_T
  std::optional<double> theorem_eps;
  std::optional<double> gamma;     // AECS only
  std::optional<double> mu_strong_estimate;
  std::optional<double> p_diff_bound;
  std::optional<SandwichCheck> sandwich;
};

/// min over equally spaced points of the segment [a, b] of lambda_min of the
/// Hessian of h_T, clamped below.
inline double strong_convexity_estimate(ScoreKind kind, const Vector& a, const Vector& b,
                                        const GramianSet& gset) {
  double lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kStrongConvexitySamples; ++k) {
    const double s = static_cast<double>(k) / (kStrongConvexitySamples - 1);
    const Vector p = (1.0 - s) * a + s * b;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian(kind, p, gset), Eigen::EigenvaluesOnly);
    lo = std::min(lo, eig.eigenvalues()(0));
  }
  return std::max(lo, kStrongConvexityFloor);
}

inline SandwichCheck check_sandwich(ScoreKind kind, const std::vector<Vector>& z,
                                    const GramianSet& full, const GramianSet& reduced,
                                    double delta_star) {
  const double m = static_cast<double>(full.m());
  SandwichCheck c;
  c.lower_slack = std::numeric_limits<double>::infinity();
  if (delta_star < 1.0) c.upper_slack = std::numeric_limits<double>::infinity();
  for (const Vector& p : z) {
    const double h = *objective_value(kind, p, full);
    const std::optional<double> h_red = objective_value(kind, p, reduced);
    if (!h_red) {
      // h_red = +inf outside X_T^red: the lower inequality holds, the upper fails.
      if (c.upper_slack) c.upper_slack = -std::numeric_limits<double>::infinity();
      continue;
    }
    if (kind == ScoreKind::vcs) {
      c.lower_slack = std::min(c.lower_slack, *h_red - (h - m * std::log1p(delta_star)));
      if (c.upper_slack)
        c.upper_slack = std::min(*c.upper_slack, (h - m * std::log1p(-delta_star)) - *h_red);
    } else {
      c.lower_slack = std::min(c.lower_slack, *h_red - h / (1.0 + delta_star));
      if (c.upper_slack) c.upper_slack = std::min(*c.upper_slack, h / (1.0 - delta_star) - *h_red);
    }
  }
  return c;
}

/// Builds the comparison from precomputed Gramian sets (full and reduced,
/// same horizon) and the matching canonical system.
inline ComparisonReport compare_scores(ScoreKind kind, const CanonicalSystem& canon,
                                       const GramianSet& full, const GramianSet& reduced,
                                       const SolverOptions& opt = {}) {
  ComparisonReport r;
  r.kind = kind;
  r.horizon = full.horizon;
  r.target = solve_score(kind, full, opt, &canon);
  r.reduced = solve_score(kind, reduced, opt, &canon);
  r.p_target = r.target.p_star;
  r.p_reduced = r.reduced.p_star;
  r.diff_norm = (r.p_reduced - r.p_target).norm();

  r.bounds = BoundInputs::from(canon, full.horizon);
  const PhiValue ph = phi(r.bounds.mu, r.bounds.horizon);
  r.phi_overflow = ph.overflow;
  r.epsilon_bound = r.bounds.epsilon_bound();
  const GramianGap gap = gramian_gap(full, reduced);
  r.delta_w_norms = gap.delta_w_norms;

  r.reduced_feasible_in_full = is_feasible(r.p_reduced, full);
  std::vector<Vector> z{r.p_target};
  if (r.reduced_feasible_in_full) z.push_back(r.p_reduced);
  const DeltaQuantities d = delta_quantities(full, gap, z, r.bounds);
  r.epsilon_t = *std::max_element(d.epsilon_at.begin(), d.epsilon_at.end());
  r.margin = d.margin;
  r.delta_star = d.delta_star;

  if (!r.reduced_feasible_in_full) return r;
  r.sandwich = check_sandwich(kind, z, full, reduced, r.delta_star);
  r.bounds_applicable = r.delta_star < 1.0;
  if (!r.bounds_applicable) return r;

  const double m = static_cast<double>(canon.m());
  const double mu_strong = strong_convexity_estimate(kind, r.p_target, r.p_reduced, full);
  r.mu_strong_estimate = mu_strong;
  if (kind == ScoreKind::vcs) {
    const double eps = m * std::max(std::log1p(r.delta_star), -std::log1p(-r.delta_star));
    r.theorem_eps = eps;
    r.p_diff_bound = 2.0 * std::sqrt(eps / mu_strong);
  } else {
    const double eps = r.delta_star / (1.0 - r.delta_star);
    const double gamma = std::max(*objective_value(kind, r.p_target, full),
                                  *objective_value(kind, r.p_reduced, full));
    r.theorem_eps = eps;
    r.gamma = gamma;
    r.p_diff_bound = 2.0 * std::sqrt(gamma) * std::sqrt(eps / mu_strong);
  }
  return r;
}

inline ComparisonReport comparison_report(ScoreKind kind, const CanonicalSystem& canon, double horizon,
                                          const SolverOptions& opt = {},
                                          const GramianOptions& gopt = {}) {
  const GramianSet full = output_gramian_set(canon, horizon, gopt);
  const GramianSet reduced = reduced_gramian_set(canon, horizon, gopt);
  return compare_scores(kind, canon, full, reduced, opt);
}

}  // namespace tcs
