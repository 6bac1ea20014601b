#pragma once

// Oracles and generators for the test suites and the `check` command. Nothing
// here calls the solvers, the adjoint rules or the null-space code it is used
// to check.

#include "difflsq/solvers.hpp"

#include <functional>

namespace difflsq {

struct FdConfig {
  /// Base step; coordinate i uses h0 * (1 + |theta_i|).
  double h0 = 1e-6;
};

/// Raised when the function under differentiation returns a non-finite value.
class NonFiniteEvaluation : public std::runtime_error {
 public:
  NonFiniteEvaluation(Index coordinate, double value);
  Index coordinate() const { return coordinate_; }

 private:
  Index coordinate_;
};

/// Central-difference gradient.
Vector fd_grad(const std::function<double(const Vector&)>& f, const Vector& theta, const FdConfig& cfg = {});

/// Moore-Penrose pseudo-inverse applied to v through a QR factorization.
Vector dense_pinv_apply(const Matrix& a, const Vector& v);

/// I - A^T (A A^T)^{-1} A for a full-row-rank A, formed explicitly.
Matrix dense_nullspace_projector(const Matrix& a);

/// Matched matrix-free problem and its dense mirror.
struct RandomProblem {
  LstSqProblem problem;
  Matrix dense;
};

RandomProblem random_problem(Index m, Index n, double cond, double lambda, std::uint64_t seed);

/// Dense operator whose adjoint reads u shifted by one index: a planted fault for the dot test.
OperatorPtr make_faulty_adjoint(const Matrix& a);

/// ||a - ref|| / ||ref||, with ||a|| returned when ref is zero.
double relative_error(const Vector& a, const Vector& ref);
double relative_error(double a, double ref);

}  // namespace difflsq
