#pragma once

// Scaling-and-squaring matrix exponential with diagonal Pade approximants
// (degrees 3, 5, 7, 9, 13), following Higham's 2005 selection thresholds.

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "tcs/errors.hpp"

namespace tcs {

namespace detail {

// Pade approximant r_m(X) = (V - U)^{-1} (V + U).
template <typename MatrixT>
MatrixT pade_solve(const MatrixT& u, const MatrixT& v) {
  return (v - u).partialPivLu().solve(v + u);
}

template <typename MatrixT, std::size_t N>
MatrixT pade_low(const MatrixT& x, const std::array<double, N>& b) {
  // N = degree + 1, degree odd and <= 9
  const auto n = x.rows();
  const MatrixT ident = MatrixT::Identity(n, n);
  const MatrixT x2 = x * x;
  MatrixT odd = b[N - 1] * ident;
  MatrixT even = b[N - 2] * ident;
  for (std::size_t k = N - 2; k >= 2; k -= 2) {
    odd = odd * x2 + b[k - 1] * ident;
    even = even * x2 + b[k - 2] * ident;
    if (k == 2) break;
  }
  return pade_solve<MatrixT>(x * odd, even);
}

template <typename MatrixT>
MatrixT pade13(const MatrixT& x) {
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const auto n = x.rows();
  const MatrixT ident = MatrixT::Identity(n, n);
  const MatrixT x2 = x * x;
  const MatrixT x4 = x2 * x2;
  const MatrixT x6 = x4 * x2;
  const MatrixT u_inner = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 +
                          b[5] * x4 + b[3] * x2 + b[1] * ident;
  const MatrixT u = x * u_inner;
  const MatrixT v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                    b[2] * x2 + b[0] * ident;
  return pade_solve<MatrixT>(u, v);
}

}  // namespace detail

/// exp(M t) for square, finite M and t >= 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix_exponential(
    const Eigen::MatrixBase<Derived>& m, double t = 1.0) {
  using MatrixT = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols()) throw ValidationError("matrix_exponential: matrix is not square");
  if (!m.allFinite()) throw ValidationError("matrix_exponential: non-finite entries");
  if (!(t >= 0.0) || !std::isfinite(t))
    throw ValidationError("matrix_exponential: time must be finite and nonnegative");

  const auto n = m.rows();
  if (n == 0) return MatrixT(0, 0);
  MatrixT x = m * t;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 == 0.0) return MatrixT::Identity(n, n);

  static constexpr std::array<double, 4> b3 = {120.0, 60.0, 12.0, 1.0};
  static constexpr std::array<double, 6> b5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static constexpr std::array<double, 8> b7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                               25200.0,    1512.0,    56.0,      1.0};
  static constexpr std::array<double, 10> b9 = {
      17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
      2162160.0,     110880.0,     3960.0,       90.0,        1.0};

  if (norm1 <= 1.495585217958292e-2) return detail::pade_low<MatrixT>(x, b3);
  if (norm1 <= 2.539398330063230e-1) return detail::pade_low<MatrixT>(x, b5);
  if (norm1 <= 9.504178996162932e-1) return detail::pade_low<MatrixT>(x, b7);
  if (norm1 <= 2.097847961257068e0) return detail::pade_low<MatrixT>(x, b9);

  constexpr double theta13 = 5.371920351148152;
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    x = std::ldexp(1.0, -squarings) * x;
  }
  MatrixT r = detail::pade13<MatrixT>(x);
  for (int k = 0; k < squarings; ++k) r = (r * r).eval();
  return r;
}

}  // namespace tcs
