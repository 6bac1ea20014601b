#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace difflsq {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using VectorF = Eigen::VectorXf;
using Matrix = Eigen::MatrixXd;
using MatrixF = Eigen::MatrixXf;

/// Raised when a vector or matrix has the wrong dimension for an operation.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& what, Index expected, Index actual);
  Index expected() const { return expected_; }
  Index actual() const { return actual_; }

 private:
  Index expected_;
  Index actual_;
};

/// Raised when an operator lacks an optional hook (e.g. the parameter gradient).
class UnsupportedCapability : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for invalid numeric inputs (non-finite data, negative weights, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OperatorKind {
  Dense,
  Diagonal,
  Convolution1D,
  RffFeatures,
  ConstraintJacobian,
  Stacked,
  Adjointed,
  Scaled,
  Composed,
};

std::string to_string(OperatorKind kind);

class LinearOperator;
using OperatorPtr = std::shared_ptr<const LinearOperator>;

/**
 * A parameterized matrix-free map A(theta): R^cols -> R^rows.
 *
 * Operators are immutable once built. Changing the parameter vector produces a
 * new operator through with_params(), so an operator can be shared by any
 * number of concurrent solves. The public apply_* entry points validate shapes
 * and then dispatch to the protected kernels that concrete kinds implement.
 */
class LinearOperator : public std::enable_shared_from_this<LinearOperator> {
 public:
  LinearOperator(Index rows, Index cols, Vector params = Vector());
  virtual ~LinearOperator() = default;

  LinearOperator(const LinearOperator&) = delete;
  LinearOperator& operator=(const LinearOperator&) = delete;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const Vector& params() const { return params_; }
  Index num_params() const { return params_.size(); }

  virtual OperatorKind kind() const = 0;

  Vector apply_forward(const Vector& v) const;
  Vector apply_adjoint(const Vector& u) const;
  VectorF apply_forward(const VectorF& v) const;
  VectorF apply_adjoint(const VectorF& u) const;

  /// Gradient of s(theta) = <u, A(theta) v> with respect to theta.
  Vector param_inner_grad(const Vector& u, const Vector& v) const;
  virtual bool has_param_inner_grad() const { return false; }

  /// Same operator family evaluated at a different parameter vector.
  virtual OperatorPtr with_params(const Vector& params) const;

  /// Dense instantiation, column by column. Test scale only.
  Matrix to_dense() const;

 protected:
  virtual void forward(const Vector& v, Vector& out) const = 0;
  virtual void adjoint(const Vector& u, Vector& out) const = 0;
  // Single-precision kernels default to a double round trip; kinds that own
  // their data override them with genuine float arithmetic.
  virtual void forward_single(const VectorF& v, VectorF& out) const;
  virtual void adjoint_single(const VectorF& u, VectorF& out) const;
  virtual void param_grad(const Vector& u, const Vector& v, Vector& out) const;

  void check_param_size(const Vector& params) const;

  // Kinds that wrap other operators dispatch to their kernels directly.
  static void forward_of(const LinearOperator& op, const Vector& v, Vector& out) { op.forward(v, out); }
  static void adjoint_of(const LinearOperator& op, const Vector& u, Vector& out) { op.adjoint(u, out); }
  static void forward_single_of(const LinearOperator& op, const VectorF& v, VectorF& out) {
    op.forward_single(v, out);
  }
  static void adjoint_single_of(const LinearOperator& op, const VectorF& u, VectorF& out) {
    op.adjoint_single(u, out);
  }
  static void param_grad_of(const LinearOperator& op, const Vector& u, const Vector& v, Vector& out) {
    op.param_grad(u, v, out);
  }

 private:
  Index rows_;
  Index cols_;
  Vector params_;
};

/// Explicit matrix. Parameterized kinds expose the entries (column-major) as theta.
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix matrix, bool parameterized = false);

  OperatorKind kind() const override { return OperatorKind::Dense; }
  bool has_param_inner_grad() const override { return parameterized_; }
  OperatorPtr with_params(const Vector& params) const override;
  const Matrix& matrix() const { return matrix_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void forward_single(const VectorF& v, VectorF& out) const override;
  void adjoint_single(const VectorF& u, VectorF& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  Matrix matrix_;
  MatrixF matrix_single_;
  bool parameterized_;
};

/// diag(d). The diagonal is theta when parameterized.
class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(Vector diagonal, bool parameterized = true);

  OperatorKind kind() const override { return OperatorKind::Diagonal; }
  bool has_param_inner_grad() const override { return parameterized_; }
  OperatorPtr with_params(const Vector& params) const override;
  const Vector& diagonal() const { return diagonal_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  Vector diagonal_;
  bool parameterized_;
};

/**
 * Square circular convolution (A v)_i = sum_j k_j v_{(i - j) mod n}.
 *
 * The kernel is theta. Kernel length must not exceed n.
 */
class Convolution1D final : public LinearOperator {
 public:
  Convolution1D(Vector kernel, Index n);

  OperatorKind kind() const override { return OperatorKind::Convolution1D; }
  bool has_param_inner_grad() const override { return true; }
  OperatorPtr with_params(const Vector& params) const override;

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;
};

/// Vertical stack [A_1; A_2; ...]. Parameters are the blocks' parameters, concatenated.
class StackedOperator final : public LinearOperator {
 public:
  explicit StackedOperator(std::vector<OperatorPtr> blocks);

  OperatorKind kind() const override { return OperatorKind::Stacked; }
  bool has_param_inner_grad() const override;
  OperatorPtr with_params(const Vector& params) const override;
  const std::vector<OperatorPtr>& blocks() const { return blocks_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  std::vector<OperatorPtr> blocks_;
};

/// A(theta)^T, sharing the wrapped operator's parameters.
class AdjointedOperator final : public LinearOperator {
 public:
  explicit AdjointedOperator(OperatorPtr inner);

  OperatorKind kind() const override { return OperatorKind::Adjointed; }
  bool has_param_inner_grad() const override { return inner_->has_param_inner_grad(); }
  OperatorPtr with_params(const Vector& params) const override;
  const OperatorPtr& inner() const { return inner_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void forward_single(const VectorF& v, VectorF& out) const override;
  void adjoint_single(const VectorF& u, VectorF& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  OperatorPtr inner_;
};

/**
 * alpha * A. When alpha is a parameter, theta = (alpha, theta_A); otherwise
 * theta = theta_A. theta * I is ScaledOperator(theta, identity(n), true).
 */
class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(double alpha, OperatorPtr inner, bool alpha_is_param = false);

  OperatorKind kind() const override { return OperatorKind::Scaled; }
  bool has_param_inner_grad() const override;
  OperatorPtr with_params(const Vector& params) const override;
  double alpha() const { return alpha_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void forward_single(const VectorF& v, VectorF& out) const override;
  void adjoint_single(const VectorF& u, VectorF& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  double alpha_;
  OperatorPtr inner_;
  bool alpha_is_param_;
};

/// outer * inner. Parameters are (theta_outer, theta_inner).
class ComposedOperator final : public LinearOperator {
 public:
  ComposedOperator(OperatorPtr outer, OperatorPtr inner);

  OperatorKind kind() const override { return OperatorKind::Composed; }
  bool has_param_inner_grad() const override;
  OperatorPtr with_params(const Vector& params) const override;

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void forward_single(const VectorF& v, VectorF& out) const override;
  void adjoint_single(const VectorF& u, VectorF& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  OperatorPtr outer_;
  OperatorPtr inner_;
};

OperatorPtr make_dense(Matrix matrix, bool parameterized = false);
OperatorPtr make_diagonal(Vector diagonal, bool parameterized = true);
OperatorPtr make_convolution(Vector kernel, Index n);
OperatorPtr identity(Index n);
OperatorPtr adjointed(OperatorPtr op);
OperatorPtr scaled(double alpha, OperatorPtr op, bool alpha_is_param = false);
OperatorPtr stacked(std::vector<OperatorPtr> blocks);
OperatorPtr composed(OperatorPtr outer, OperatorPtr inner);
/// [A; lambda I], the explicit Tikhonov stacking used as a test oracle.
OperatorPtr stack_tikhonov(OperatorPtr op, double lambda);

/// Max over trials of |<u, A v> - <A^T u, v>| with standard-normal u, v.
double dot_test(const LinearOperator& op, int trials, std::uint64_t seed);

/// Same draws as dot_test, each discrepancy divided by ||u|| ||v|| ||A||_est.
double dot_test_relative(const LinearOperator& op, int trials, std::uint64_t seed);

/// Power-iteration estimate of the spectral norm; deterministic.
double estimate_norm(const LinearOperator& op, int iterations = 30, std::uint64_t seed = 0x5eed);

/// Dense fixtures: a `rows,cols` header line, a line with the two sizes, then
/// one comma-separated line per row.
Matrix read_dense_csv(const std::filesystem::path& path);
void write_dense_csv(const std::filesystem::path& path, const Matrix& matrix);

}  // namespace difflsq
