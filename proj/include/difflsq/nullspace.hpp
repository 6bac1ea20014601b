#pragma once

#include "difflsq/adjoint.hpp"

#include <functional>
#include <memory>

namespace difflsq {

/**
 * Equality constraint c: R^D -> R^k with Jacobian products.
 *
 * k = 0 is allowed and means "unconstrained"; the hooks are then never called.
 */
struct ConstraintSpec {
  Index dim_theta = 0;
  Index dim_constraint = 0;
  std::function<Vector(const Vector&)> value;
  /// (theta, v) -> J_c(theta) v
  std::function<Vector(const Vector&, const Vector&)> jvp;
  /// (theta, u) -> J_c(theta)^T u
  std::function<Vector(const Vector&, const Vector&)> tjvp;

  void validate() const;
};

/// Constraint defined by a value function and an explicit Jacobian.
ConstraintSpec dense_constraint(Index dim_theta, Index dim_constraint, std::function<Vector(const Vector&)> value,
                                std::function<Matrix(const Vector&)> jacobian);

/// c(theta) = ||theta||^2 - 1.
ConstraintSpec sphere_constraint(Index dim_theta);

/// c(theta) = J theta - t for a fixed matrix J.
ConstraintSpec linear_constraint(Matrix jacobian, Vector target);

/// The unconstrained spec with k = 0.
ConstraintSpec no_constraint(Index dim_theta);

/// J_c(theta) as a matrix-free k x D operator built from jvp / tjvp.
class ConstraintJacobianOperator final : public LinearOperator {
 public:
  ConstraintJacobianOperator(ConstraintSpec spec, Vector theta);
  OperatorKind kind() const override { return OperatorKind::ConstraintJacobian; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;

 private:
  ConstraintSpec spec_;
  Vector theta_;
};

OperatorPtr constraint_jacobian(const ConstraintSpec& spec, const Vector& theta);

struct NullSpaceConfig {
  double eta = 0.1;
  double gamma = 0.5;
  SolveConfig solver{1e-10, 1e-10, 1e10, 0, Precision::Double};

  void validate() const;
};

struct KktReport {
  double primal_residual = 0.0;
  double stationarity_residual = 0.0;
  Vector lagrange_estimate;
};

/**
 * Null-space update delta = theta_{t+1} - theta_t:
 *
 *   delta = -eta grad + LstSq(J, eta J grad - gamma c, 0)
 *         = -eta (I - J^+ J) grad - gamma J^+ c.
 *
 * One wide min-norm solve on the constraint Jacobian.
 */
Vector nsm_step(const Vector& theta, const Vector& grad_loss, const ConstraintSpec& cs, const NullSpaceConfig& cfg);

/// (I - J^+ J) v with one min-norm solve.
Vector project_tangent(const Vector& theta, const Vector& v, const ConstraintSpec& cs, const SolveConfig& cfg);

/// Primal feasibility and Lagrangian stationarity at theta.
KktReport kkt_report(const Vector& theta, const Vector& grad_loss, const ConstraintSpec& cs, const SolveConfig& cfg);

/// Reduction of min ||W x - v||^2 s.t. A x = b to a plain min-norm problem in z = W x - v.
struct WeightedReduction {
  OperatorPtr op;
  Vector b;
  Vector weights;
  Vector shift;

  Vector recover(const Vector& z) const;
};

WeightedReduction weighted_to_standard(const Vector& w_diag, const Vector& v, OperatorPtr a, const Vector& b);

/// theta, g -> -nsm_step(theta, g) / eta: the projected gradient fed to a base rule.
class GradientTransform {
 public:
  GradientTransform(ConstraintSpec cs, NullSpaceConfig cfg);
  Vector operator()(const Vector& theta, const Vector& grad) const;
  const ConstraintSpec& constraint() const { return cs_; }
  const NullSpaceConfig& config() const { return cfg_; }

 private:
  ConstraintSpec cs_;
  NullSpaceConfig cfg_;
};

GradientTransform chain_transform(const ConstraintSpec& cs, const NullSpaceConfig& cfg);

/// Base update rules: step(g) returns the increment added to theta.
class UpdateRule {
 public:
  virtual ~UpdateRule() = default;
  virtual Vector step(const Vector& grad) = 0;
};

class GradientDescent final : public UpdateRule {
 public:
  explicit GradientDescent(double lr) : lr_(lr) {}
  Vector step(const Vector& grad) override { return -lr_ * grad; }

 private:
  double lr_;
};

class Adam final : public UpdateRule {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  Vector step(const Vector& grad) override;

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  Vector m_;
  Vector v_;
  int t_ = 0;
};

/// Gradient transform followed by a base rule.
class ConstrainedOptimizer {
 public:
  ConstrainedOptimizer(GradientTransform transform, std::unique_ptr<UpdateRule> rule);
  /// Returns the next parameter vector.
  Vector update(const Vector& theta, const Vector& grad);

 private:
  GradientTransform transform_;
  std::unique_ptr<UpdateRule> rule_;
};

}  // namespace difflsq
