#pragma once

#include "difflsq/solvers.hpp"

#include <atomic>
#include <memory>

namespace difflsq {

/// Downstream gradient d mu / d x at the least-squares solution.
struct Cotangent {
  Vector grad_x;
};

/// Reverse-mode gradients of mu(LstSq(A(theta), b, lambda)).
struct GradientBundle {
  Vector grad_params;
  Vector grad_b;
  double grad_lambda = 0.0;
  /// Least-squares solves spent on this bundle.
  Index inner_solves = 0;
};

/**
 * Intermediate vectors of the backward pass, exposed for tests.
 *
 * Tall: xi = LstSq(A, grad_b, 0) and r = A x - b.
 * Wide: y = LstSq(A^T, x, 0) and r = A^T grad_b - grad_x.
 */
struct AdjointScratch {
  Vector residual;
  Vector xi;
  Vector y;
  Vector grad_b;
};

/// An inner or forward solve that did not converge; carries the stop reason.
class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& context, StopReason reason);
  StopReason reason() const { return reason_; }

 private:
  StopReason reason_;
};

// Signs of the theta- and lambda-gradients relative to g(theta) and the
// printed lambda formulas. Both are -1; the finite-difference tests in
// test_adjoint.cpp pin them.
inline constexpr double kParamGradSign = -1.0;
inline constexpr double kLambdaGradSign = -1.0;

/// Backward pass for tall (m >= n) problems. Performs exactly two solves.
GradientBundle grad_tall(const LstSqProblem& problem, const Vector& x, const Cotangent& cot, const SolveConfig& cfg,
                         AdjointScratch* scratch = nullptr);

/// Backward pass for wide (m < n) problems. Performs exactly two solves.
GradientBundle grad_wide(const LstSqProblem& problem, const Vector& x, const Cotangent& cot, const SolveConfig& cfg,
                         AdjointScratch* scratch = nullptr);

/// Inner solves run with the forward configuration tightened by this factor.
SolveConfig inner_config(const SolveConfig& cfg);

/// Reusable pullback over a captured forward solve.
class Pullback {
 public:
  Pullback(LstSqProblem problem, Vector x, SolveConfig cfg);

  GradientBundle operator()(const Cotangent& cot) const;

  /// Inner solves performed by all invocations of this pullback so far.
  Index solves_performed() const { return counter_->load(); }
  const Vector& x() const { return x_; }

 private:
  LstSqProblem problem_;
  Vector x_;
  SolveConfig cfg_;
  std::shared_ptr<std::atomic<Index>> counter_;
};

struct VjpResult {
  SolveReport report;
  Pullback pullback;
};

/// Forward solve plus its pullback. Throws SolveFailure if the forward solve fails.
VjpResult vjp_lstsq(const LstSqProblem& problem, const SolveConfig& cfg = {});

/// Forward solve that throws SolveFailure unless LSMR converged.
SolveReport solve_checked(const LstSqProblem& problem, const SolveConfig& cfg, const std::string& context);

}  // namespace difflsq
