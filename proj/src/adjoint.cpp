#include "difflsq/adjoint.hpp"

namespace difflsq {

SolveFailure::SolveFailure(const std::string& context, StopReason reason)
    : std::runtime_error(context + ": least-squares solve stopped with " + to_string(reason)), reason_(reason) {}

SolveConfig inner_config(const SolveConfig& cfg) {
  SolveConfig inner = cfg;
  inner.atol = cfg.atol / 10.0;
  inner.btol = cfg.btol / 10.0;
  return inner;
}

SolveReport solve_checked(const LstSqProblem& problem, const SolveConfig& cfg, const std::string& context) {
  SolveReport report = lsmr(problem, cfg);
  if (report.stop_reason == StopReason::MaxIter || report.stop_reason == StopReason::ConLimExceeded) {
    throw SolveFailure(context, report.stop_reason);
  }
  return report;
}

namespace {

void check_inputs(const LstSqProblem& problem, const Vector& x, const Cotangent& cot) {
  problem.validate();
  const Index n = problem.op->cols();
  if (x.size() != n) throw ShapeError("adjoint: solution", n, x.size());
  if (cot.grad_x.size() != n) throw ShapeError("adjoint: cotangent", n, cot.grad_x.size());
  if (!cot.grad_x.allFinite()) throw ValidationError("adjoint: cotangent has non-finite entries");
  if (problem.op->num_params() > 0 && !problem.op->has_param_inner_grad()) {
    throw UnsupportedCapability("adjoint: operator has parameters but no parameter-gradient hook");
  }
}

// Runs inner solves and counts them.
class InnerSolver {
 public:
  explicit InnerSolver(const SolveConfig& cfg) : cfg_(inner_config(cfg)) {}
  Vector operator()(const LstSqProblem& problem, const char* context) {
    ++count_;
    return solve_checked(problem, cfg_, context).x;
  }
  Index count() const { return count_; }

 private:
  SolveConfig cfg_;
  Index count_ = 0;
};

Vector params_gradient(const LinearOperator& op, const Vector& u1, const Vector& v1, const Vector& u2,
                       const Vector& v2) {
  if (op.num_params() == 0) return Vector();
  return kParamGradSign * (op.param_inner_grad(u1, v1) + op.param_inner_grad(u2, v2));
}

}  // namespace

GradientBundle grad_tall(const LstSqProblem& problem, const Vector& x, const Cotangent& cot, const SolveConfig& cfg,
                         AdjointScratch* scratch) {
  check_inputs(problem, x, cot);
  const LinearOperator& a = *problem.op;
  InnerSolver solve(cfg);

  GradientBundle out;
  // grad_b = A (A^T A + lambda^2 I)^{-1} grad_x, a min-norm solve on the wide A^T.
  out.grad_b = solve({adjointed(problem.op), cot.grad_x, problem.lambda}, "grad_tall: grad_b");
  // xi = (A^T A)^{-1} A^T grad_b = (A^T A + lambda^2 I)^{-1} grad_x.
  const Vector xi = solve({problem.op, out.grad_b, 0.0}, "grad_tall: xi");
  out.inner_solves = solve.count();

  const Vector r = a.apply_forward(x) - problem.b;
  // g(theta) = <r, A(theta) xi> + <grad_b, A(theta) x>
  out.grad_params = params_gradient(a, r, xi, out.grad_b, x);
  out.grad_lambda = kLambdaGradSign * 2.0 * problem.lambda * xi.dot(x);

  if (scratch) {
    scratch->residual = r;
    scratch->xi = xi;
    scratch->y.resize(0);
    scratch->grad_b = out.grad_b;
  }
  return out;
}

GradientBundle grad_wide(const LstSqProblem& problem, const Vector& x, const Cotangent& cot, const SolveConfig& cfg,
                         AdjointScratch* scratch) {
  check_inputs(problem, x, cot);
  const LinearOperator& a = *problem.op;
  InnerSolver solve(cfg);
  const OperatorPtr at = adjointed(problem.op);

  GradientBundle out;
  // grad_b = (A A^T + lambda^2 I)^{-1} A grad_x, a tall solve on A^T.
  out.grad_b = solve({at, cot.grad_x, problem.lambda}, "grad_wide: grad_b");
  // y = (A A^T)^{-1} A x = (A A^T + lambda^2 I)^{-1} b.
  const Vector y = solve({at, x, 0.0}, "grad_wide: y");
  out.inner_solves = solve.count();

  const Vector r = a.apply_adjoint(out.grad_b) - cot.grad_x;
  // g(theta) = <grad_b, A(theta) x> + <y, A(theta) r>
  out.grad_params = params_gradient(a, out.grad_b, x, y, r);
  out.grad_lambda = kLambdaGradSign * 2.0 * problem.lambda * out.grad_b.dot(y);

  if (scratch) {
    scratch->residual = r;
    scratch->xi.resize(0);
    scratch->y = y;
    scratch->grad_b = out.grad_b;
  }
  return out;
}

Pullback::Pullback(LstSqProblem problem, Vector x, SolveConfig cfg)
    : problem_(std::move(problem)),
      x_(std::move(x)),
      cfg_(cfg),
      counter_(std::make_shared<std::atomic<Index>>(0)) {}

GradientBundle Pullback::operator()(const Cotangent& cot) const {
  GradientBundle out = problem_.mode() == ProblemMode::Tall ? grad_tall(problem_, x_, cot, cfg_)
                                                            : grad_wide(problem_, x_, cot, cfg_);
  counter_->fetch_add(out.inner_solves);
  return out;
}

VjpResult vjp_lstsq(const LstSqProblem& problem, const SolveConfig& cfg) {
  SolveReport report = solve_checked(problem, cfg, "vjp_lstsq: forward solve");
  Pullback pullback(problem, report.x, cfg);
  return {std::move(report), std::move(pullback)};
}

}  // namespace difflsq
