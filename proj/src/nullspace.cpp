#include "difflsq/nullspace.hpp"

#include <cmath>
#include <sstream>

namespace difflsq {

void ConstraintSpec::validate() const {
  if (dim_theta < 1) throw ValidationError("constraint: dim_theta must be positive");
  if (dim_constraint < 0) throw ValidationError("constraint: dim_constraint must be >= 0");
  if (dim_constraint > dim_theta) {
    throw ValidationError("constraint: more constraints than parameters (k > D)");
  }
  if (dim_constraint > 0 && (!value || !jvp || !tjvp)) {
    throw ValidationError("constraint: value, jvp and tjvp hooks are required when k > 0");
  }
}

ConstraintSpec dense_constraint(Index dim_theta, Index dim_constraint, std::function<Vector(const Vector&)> value,
                                std::function<Matrix(const Vector&)> jacobian) {
  ConstraintSpec cs;
  cs.dim_theta = dim_theta;
  cs.dim_constraint = dim_constraint;
  cs.value = std::move(value);
  cs.jvp = [jacobian](const Vector& theta, const Vector& v) -> Vector { return jacobian(theta) * v; };
  cs.tjvp = [jacobian](const Vector& theta, const Vector& u) -> Vector { return jacobian(theta).transpose() * u; };
  return cs;
}

ConstraintSpec sphere_constraint(Index dim_theta) {
  ConstraintSpec cs;
  cs.dim_theta = dim_theta;
  cs.dim_constraint = 1;
  cs.value = [](const Vector& theta) -> Vector { return Vector::Constant(1, theta.squaredNorm() - 1.0); };
  cs.jvp = [](const Vector& theta, const Vector& v) -> Vector { return Vector::Constant(1, 2.0 * theta.dot(v)); };
  cs.tjvp = [](const Vector& theta, const Vector& u) -> Vector { return 2.0 * u[0] * theta; };
  return cs;
}

ConstraintSpec linear_constraint(Matrix jacobian, Vector target) {
  if (target.size() != jacobian.rows()) throw ShapeError("linear_constraint(target)", jacobian.rows(), target.size());
  const Index d = jacobian.cols();
  const Index k = jacobian.rows();
  auto j = std::make_shared<const Matrix>(std::move(jacobian));
  auto t = std::make_shared<const Vector>(std::move(target));
  ConstraintSpec cs;
  cs.dim_theta = d;
  cs.dim_constraint = k;
  cs.value = [j, t](const Vector& theta) -> Vector { return *j * theta - *t; };
  cs.jvp = [j](const Vector&, const Vector& v) -> Vector { return *j * v; };
  cs.tjvp = [j](const Vector&, const Vector& u) -> Vector { return j->transpose() * u; };
  return cs;
}

ConstraintSpec no_constraint(Index dim_theta) {
  ConstraintSpec cs;
  cs.dim_theta = dim_theta;
  cs.dim_constraint = 0;
  return cs;
}

ConstraintJacobianOperator::ConstraintJacobianOperator(ConstraintSpec spec, Vector theta)
    : LinearOperator(spec.dim_constraint, spec.dim_theta), spec_(std::move(spec)), theta_(std::move(theta)) {
  if (theta_.size() != spec_.dim_theta) throw ShapeError("constraint Jacobian theta", spec_.dim_theta, theta_.size());
}

void ConstraintJacobianOperator::forward(const Vector& v, Vector& out) const {
  out = spec_.jvp(theta_, v);
  if (out.size() != rows()) throw ShapeError("constraint jvp output", rows(), out.size());
}

void ConstraintJacobianOperator::adjoint(const Vector& u, Vector& out) const {
  out = spec_.tjvp(theta_, u);
  if (out.size() != cols()) throw ShapeError("constraint tjvp output", cols(), out.size());
}

OperatorPtr constraint_jacobian(const ConstraintSpec& spec, const Vector& theta) {
  return std::make_shared<ConstraintJacobianOperator>(spec, theta);
}

void NullSpaceConfig::validate() const {
  if (!(eta > 0.0) || !(gamma > 0.0)) throw ValidationError("null-space rates eta and gamma must be positive");
  solver.validate();
}

namespace {

void check_theta(const ConstraintSpec& cs, const Vector& theta, const Vector& other, const char* what) {
  cs.validate();
  if (theta.size() != cs.dim_theta) throw ShapeError("theta", cs.dim_theta, theta.size());
  if (other.size() != cs.dim_theta) throw ShapeError(what, cs.dim_theta, other.size());
}

Vector checked_value(const ConstraintSpec& cs, const Vector& theta) {
  Vector c = cs.value(theta);
  if (c.size() != cs.dim_constraint) throw ShapeError("constraint value", cs.dim_constraint, c.size());
  return c;
}

// Minimum-norm solution of J(theta) x = rhs; failures carry the constraint residual.
Vector min_norm_solve(const ConstraintSpec& cs, const Vector& theta, const Vector& rhs, const SolveConfig& cfg,
                      const char* context) {
  try {
    return solve_checked({constraint_jacobian(cs, theta), rhs, 0.0}, cfg, context).x;
  } catch (const SolveFailure& e) {
    std::ostringstream os;
    os << context << " (||c(theta)|| = " << checked_value(cs, theta).norm() << ")";
    throw SolveFailure(os.str(), e.reason());
  }
}

}  // namespace

Vector nsm_step(const Vector& theta, const Vector& grad_loss, const ConstraintSpec& cs, const NullSpaceConfig& cfg) {
  check_theta(cs, theta, grad_loss, "grad_loss");
  cfg.validate();
  Vector delta = -cfg.eta * grad_loss;
  if (cs.dim_constraint == 0) return delta;
  const Vector c = checked_value(cs, theta);
  const Vector rhs = cfg.eta * cs.jvp(theta, grad_loss) - cfg.gamma * c;
  delta += min_norm_solve(cs, theta, rhs, cfg.solver, "nsm_step");
  return delta;
}

Vector project_tangent(const Vector& theta, const Vector& v, const ConstraintSpec& cs, const SolveConfig& cfg) {
  check_theta(cs, theta, v, "v");
  if (cs.dim_constraint == 0) return v;
  return v - min_norm_solve(cs, theta, cs.jvp(theta, v), cfg, "project_tangent");
}

KktReport kkt_report(const Vector& theta, const Vector& grad_loss, const ConstraintSpec& cs, const SolveConfig& cfg) {
  check_theta(cs, theta, grad_loss, "grad_loss");
  KktReport report;
  if (cs.dim_constraint == 0) {
    report.stationarity_residual = grad_loss.norm();
    return report;
  }
  report.primal_residual = checked_value(cs, theta).norm();
  // lambda* = argmin ||J^T lambda - grad||, a tall solve on the adjointed Jacobian.
  const OperatorPtr jt = adjointed(constraint_jacobian(cs, theta));
  try {
    report.lagrange_estimate = solve_checked({jt, grad_loss, 0.0}, cfg, "kkt_report").x;
  } catch (const SolveFailure& e) {
    std::ostringstream os;
    os << "kkt_report (||c(theta)|| = " << report.primal_residual << ")";
    throw SolveFailure(os.str(), e.reason());
  }
  report.stationarity_residual = (grad_loss - cs.tjvp(theta, report.lagrange_estimate)).norm();
  return report;
}

Vector WeightedReduction::recover(const Vector& z) const {
  if (z.size() != weights.size()) throw ShapeError("recover(z)", weights.size(), z.size());
  return (z + shift).cwiseQuotient(weights);
}

WeightedReduction weighted_to_standard(const Vector& w_diag, const Vector& v, OperatorPtr a, const Vector& b) {
  if (w_diag.size() != a->cols()) throw ShapeError("weights", a->cols(), w_diag.size());
  if (v.size() != a->cols()) throw ShapeError("shift", a->cols(), v.size());
  if (b.size() != a->rows()) throw ShapeError("right-hand side", a->rows(), b.size());
  if (!w_diag.allFinite() || (w_diag.array() <= 0.0).any()) {
    throw ValidationError("weighted reduction needs strictly positive finite weights");
  }
  const Vector w_inv = w_diag.cwiseInverse();
  WeightedReduction out;
  out.b = b - a->apply_forward(Vector(w_inv.cwiseProduct(v)));
  out.op = composed(std::move(a), make_diagonal(w_inv, false));
  out.weights = w_diag;
  out.shift = v;
  return out;
}

GradientTransform::GradientTransform(ConstraintSpec cs, NullSpaceConfig cfg) : cs_(std::move(cs)), cfg_(cfg) {
  cs_.validate();
  cfg_.validate();
}

Vector GradientTransform::operator()(const Vector& theta, const Vector& grad) const {
  return -nsm_step(theta, grad, cs_, cfg_) / cfg_.eta;
}

GradientTransform chain_transform(const ConstraintSpec& cs, const NullSpaceConfig& cfg) { return {cs, cfg}; }

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

Vector Adam::step(const Vector& grad) {
  if (m_.size() != grad.size()) {
    m_ = Vector::Zero(grad.size());
    v_ = Vector::Zero(grad.size());
    t_ = 0;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  return -lr_ * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + eps_).matrix());
}

ConstrainedOptimizer::ConstrainedOptimizer(GradientTransform transform, std::unique_ptr<UpdateRule> rule)
    : transform_(std::move(transform)), rule_(std::move(rule)) {}

Vector ConstrainedOptimizer::update(const Vector& theta, const Vector& grad) {
  return theta + rule_->step(transform_(theta, grad));
}

}  // namespace difflsq
