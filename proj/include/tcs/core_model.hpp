#pragma once

// System matrix, target selection and the permutation into canonical block form
// (targets first, in caller order; non-targets after, in original order).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tcs/errors.hpp"

namespace tcs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::vector<std::string> default_labels(Index n) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels.push_back("node_" + std::to_string(i + 1));
  return labels;
}

/// Dynamics matrix A of x' = A x, with one label per node.
class SystemMatrix {
public:
  SystemMatrix() = default;

  explicit SystemMatrix(Matrix entries)
      : SystemMatrix(entries, default_labels(entries.rows())) {}

  SystemMatrix(Matrix entries, std::vector<std::string> labels)
      : entries_(std::move(entries)), labels_(std::move(labels)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
      throw ValidationError("system matrix must be square and nonempty, got " +
                            std::to_string(entries_.rows()) + "x" +
                            std::to_string(entries_.cols()));
    if (!all_finite(entries_))
      throw ValidationError("system matrix has non-finite entries");
    if (static_cast<Index>(labels_.size()) != entries_.rows())
      throw ValidationError("expected " + std::to_string(entries_.rows()) +
                            " labels, got " + std::to_string(labels_.size()));
  }

  const Matrix& entries() const noexcept { return entries_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  Index n() const noexcept { return entries_.rows(); }

private:
  Matrix entries_;
  std::vector<std::string> labels_;
};

/// Ordered, 0-based target node indices. Order defines output coordinate order.
class TargetSpec {
public:
  TargetSpec() = default;
  explicit TargetSpec(std::vector<Index> zero_based) : indices_(std::move(zero_based)) {}

  static TargetSpec from_one_based(const std::vector<Index>& one_based) {
    std::vector<Index> idx;
    idx.reserve(one_based.size());
    for (Index i : one_based) idx.push_back(i - 1);
    return TargetSpec(std::move(idx));
  }

  // Targets 0..m-1, i.e. the system is already canonical.
  static TargetSpec leading(Index m) {
    std::vector<Index> idx(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    return TargetSpec(std::move(idx));
  }

  const std::vector<Index>& indices() const noexcept { return indices_; }
  Index m() const noexcept { return static_cast<Index>(indices_.size()); }

  void validate(Index n) const {
    if (indices_.empty()) throw ValidationError("target list is empty");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Index i : indices_) {
      if (i < 0 || i >= n)
        throw ValidationError("target index " + std::to_string(i + 1) +
                              " out of range [1, " + std::to_string(n) + "]");
      if (seen[static_cast<std::size_t>(i)])
        throw ValidationError("duplicate target index " + std::to_string(i + 1));
      seen[static_cast<std::size_t>(i)] = true;
    }
  }

private:
  std::vector<Index> indices_;
};

/// A permuted so that the targets occupy the first m coordinates, split into
/// the 2x2 blocks [[a11, a12], [a21, a22]].
struct CanonicalSystem {
  Matrix a11, a12, a21, a22;
  std::vector<Index> permutation;  // canonical index -> original index
  std::vector<std::string> labels;  // labels in canonical order

  Index m() const noexcept { return a11.rows(); }
  Index n() const noexcept { return a11.rows() + a22.rows(); }

  /// Full permuted matrix P A P^T.
  Matrix assembled() const {
    const Index m_ = m(), n_ = n();
    Matrix a(n_, n_);
    a.topLeftCorner(m_, m_) = a11;
    a.topRightCorner(m_, n_ - m_) = a12;
    a.bottomLeftCorner(n_ - m_, m_) = a21;
    a.bottomRightCorner(n_ - m_, n_ - m_) = a22;
    return a;
  }

  /// Original-coordinate A, recovered through the inverse permutation.
  Matrix original() const {
    const Matrix a = assembled();
    const Index n_ = n();
    Matrix out(n_, n_);
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < n_; ++j)
        out(permutation[static_cast<std::size_t>(i)],
            permutation[static_cast<std::size_t>(j)]) = a(i, j);
    return out;
  }
};

inline CanonicalSystem canonicalize(const SystemMatrix& system, const TargetSpec& targets) {
  const Index n = system.n();
  targets.validate(n);
  const Index m = targets.m();

  std::vector<Index> perm = targets.indices();
  perm.reserve(static_cast<std::size_t>(n));
  std::vector<bool> is_target(static_cast<std::size_t>(n), false);
  for (Index i : targets.indices()) is_target[static_cast<std::size_t>(i)] = true;
  for (Index i = 0; i < n; ++i)
    if (!is_target[static_cast<std::size_t>(i)]) perm.push_back(i);

  const Matrix& a = system.entries();
  Matrix pa(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      pa(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);

  CanonicalSystem c;
  c.a11 = pa.topLeftCorner(m, m);
  c.a12 = pa.topRightCorner(m, n - m);
  c.a21 = pa.bottomLeftCorner(n - m, m);
  c.a22 = pa.bottomRightCorner(n - m, n - m);
  c.permutation = std::move(perm);
  c.labels.reserve(static_cast<std::size_t>(n));
  for (Index i : c.permutation) c.labels.push_back(system.labels()[static_cast<std::size_t>(i)]);
  return c;
}

/// Canonical system that treats the m x m block a11 as a standalone system with
/// every node targeted (the reduced virtual system).
inline CanonicalSystem standalone(const Matrix& a11, std::vector<std::string> labels = {}) {
  const Index m = a11.rows();
  if (labels.empty()) labels = default_labels(m);
  return canonicalize(SystemMatrix(a11, std::move(labels)), TargetSpec::leading(m));
}

}  // namespace tcs
