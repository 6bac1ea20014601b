#pragma once

#include "difflsq/linop.hpp"

#include <cmath>

namespace difflsq {

/// Normalizers at or below this multiple of ||A||_est count as zero.
inline constexpr double kBreakdownFactor = 1e-14;

/**
 * One step of the Golub-Kahan recurrence started from b:
 *
 *   beta_1 u_1 = b,                      alpha_1 v_1 = A^T u_1,
 *   beta_{k+1} u_{k+1} = A v_k - alpha_k u_k,
 *   alpha_{k+1} v_{k+1} = A^T u_{k+1} - beta_{k+1} v_k.
 *
 * Vectors are stored in Scalar (float for the single-precision solver path);
 * alpha, beta and the norm estimate are always double.
 */
template <class Scalar>
struct BidiagState {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Index k = 0;
  Vec u;
  Vec v;
  double alpha = 0.0;
  double beta = 0.0;
  /// Running Frobenius estimate of the bidiagonal matrix generated so far.
  double anorm_est = 0.0;
  /// Exact factorization reached: the last normalizer vanished.
  bool breakdown = false;
};

/// Raised when the starting vector is zero.
class DegenerateStart : public std::invalid_argument {
 public:
  DegenerateStart() : std::invalid_argument("Golub-Kahan start vector b is zero") {}
};

namespace detail {

template <class Vec>
double norm2(const Vec& x) {
  if constexpr (std::is_same_v<typename Vec::Scalar, double>) {
    return x.norm();
  } else {
    return std::sqrt(x.template cast<double>().squaredNorm());
  }
}

}  // namespace detail

/**
 * Initializes the recurrence. If anorm_hint is negative the operator norm is
 * estimated by power iteration for the alpha_1 breakdown test; pass 0 to test
 * alpha_1 for exact zero only (what the streaming solvers do).
 */
template <class Scalar>
BidiagState<Scalar> gk_init(const LinearOperator& op, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                            double anorm_hint = -1.0) {
  if (b.size() != op.rows()) throw ShapeError("gk_init(b)", op.rows(), b.size());
  BidiagState<Scalar> s;
  s.beta = detail::norm2(b);
  if (s.beta == 0.0) throw DegenerateStart();
  s.u = b / static_cast<Scalar>(s.beta);
  s.v = op.apply_adjoint(s.u);
  s.alpha = detail::norm2(s.v);
  s.k = 1;
  const double anorm = anorm_hint < 0.0 ? estimate_norm(op) : anorm_hint;
  if (s.alpha <= kBreakdownFactor * anorm || s.alpha == 0.0) {
    s.breakdown = true;  // b is orthogonal to range(A)
    s.v.setZero();
  } else {
    s.v /= static_cast<Scalar>(s.alpha);
  }
  s.anorm_est = std::max(anorm, s.alpha);
  return s;
}

/// Advances the recurrence by one step; breakdown is reported on the state.
template <class Scalar>
BidiagState<Scalar> gk_step(const LinearOperator& op, const BidiagState<Scalar>& state) {
  BidiagState<Scalar> s;
  s.k = state.k + 1;
  s.u = op.apply_forward(state.v);
  s.u -= static_cast<Scalar>(state.alpha) * state.u;
  s.beta = detail::norm2(s.u);
  s.anorm_est = std::hypot(state.anorm_est, s.beta);
  if (s.beta <= kBreakdownFactor * s.anorm_est) {
    s.breakdown = true;
    s.v = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(op.cols());
    return s;
  }
  s.u /= static_cast<Scalar>(s.beta);
  s.v = op.apply_adjoint(s.u);
  s.v -= static_cast<Scalar>(s.beta) * state.v;
  s.alpha = detail::norm2(s.v);
  s.anorm_est = std::hypot(s.anorm_est, s.alpha);
  if (s.alpha <= kBreakdownFactor * s.anorm_est) {
    s.breakdown = true;
    s.v.setZero();
    return s;
  }
  s.v /= static_cast<Scalar>(s.alpha);
  return s;
}

/**
 * Explicit factors A V = U B after k steps.
 *
 * B is (k+1) x k lower bidiagonal with diagonal alpha_1..alpha_k and
 * subdiagonal beta_2..beta_{k+1}; U has k+1 columns and U e_1 = b / ||b||.
 * When the recurrence breaks down after j steps the factors are truncated to
 * the exact square form A V_j = U_j B_j and `exact` is set.
 */
struct BidiagFactors {
  Matrix U;
  Matrix V;
  Matrix B;
  Vector alphas;
  Vector betas;  // beta_1 .. beta_{rank+1}
  Index rank = 0;
  bool exact = false;

  /// The k x k leading block, i.e. the square lower-bidiagonal form.
  Matrix square_b() const { return B.topLeftCorner(rank, rank); }
};

BidiagFactors gk_factor(const LinearOperator& op, const Vector& b, Index k, bool reorthogonalize = false);

}  // namespace difflsq
