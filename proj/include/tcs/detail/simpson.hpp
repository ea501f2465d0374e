#pragma once

// Composite Simpson rule with interval halving for stacks of matrices.
// The integrand is supplied as a "node summer": sum_nodes(t0, step, count)
// must return sum_{k<count} f(t0 + k*step), which lets callers propagate state
// along an arithmetic grid instead of evaluating each node from scratch.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tcs/errors.hpp"

namespace tcs::detail {

using Stack = std::vector<Eigen::MatrixXd>;

inline void axpy(Stack& y, double a, const Stack& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline Stack scaled_sum(const Stack& ends, const Stack& odd, const Stack& even, double h) {
  Stack s = ends;
  axpy(s, 4.0, odd);
  axpy(s, 2.0, even);
  for (auto& x : s) x *= h / 3.0;
  return s;
}

// Largest per-member relative change max|a - b| / max|a|.
inline double relative_change(const Stack& next, const Stack& prev) {
  double worst = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const double scale = next[i].cwiseAbs().maxCoeff();
    const double diff = (next[i] - prev[i]).cwiseAbs().maxCoeff();
    if (diff == 0.0) continue;
    worst = std::max(worst, scale > 0.0 ? diff / scale : INFINITY);
  }
  return worst;
}

struct SimpsonResult {
  Stack value;
  std::int64_t intervals = 0;
  double residual = 0.0;  // relative change at the final halving
};

struct SimpsonOptions {
  double rtol = 1e-10;
  std::int64_t min_intervals = 16;
  std::int64_t max_intervals = std::int64_t{1} << 20;
};

template <typename NodeSummer>
SimpsonResult simpson(NodeSummer&& sum_nodes, double horizon, const SimpsonOptions& opt = {}) {
  std::int64_t n = 2;
  double h = horizon / 2.0;
  Stack ends = sum_nodes(0.0, horizon, 2);
  Stack odd = sum_nodes(h, h, 1);
  Stack even = ends;
  for (auto& x : even) x.setZero();
  Stack current = scaled_sum(ends, odd, even, h);
  double residual = INFINITY;

  while (true) {
    const std::int64_t next_n = 2 * n;
    if (next_n > opt.max_intervals)
      throw AccuracyError("Simpson quadrature did not converge within " +
                              std::to_string(opt.max_intervals) + " intervals",
                          residual);
    const double next_h = h / 2.0;
    axpy(even, 1.0, odd);
    odd = sum_nodes(next_h, 2.0 * next_h, n);
    Stack next = scaled_sum(ends, odd, even, next_h);
    residual = relative_change(next, current);
    current = std::move(next);
    n = next_n;
    h = next_h;
    if (n >= opt.min_intervals && residual <= opt.rtol) break;
  }
  return {std::move(current), n, residual};
}

}  // namespace tcs::detail
