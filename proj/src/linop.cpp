#include "difflsq/linop.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace difflsq {

namespace {

std::string shape_message(const std::string& what, Index expected, Index actual) {
  std::ostringstream os;
  os << what << ": expected length " << expected << ", got " << actual;
  return os.str();
}

Vector concat_params(const std::vector<OperatorPtr>& blocks) {
  Index total = 0;
  for (const auto& b : blocks) total += b->num_params();
  Vector out(total);
  Index offset = 0;
  for (const auto& b : blocks) {
    out.segment(offset, b->num_params()) = b->params();
    offset += b->num_params();
  }
  return out;
}

Vector vectorized(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace

ShapeError::ShapeError(const std::string& what, Index expected, Index actual)
    : std::invalid_argument(shape_message(what, expected, actual)), expected_(expected), actual_(actual) {}

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Dense: return "Dense";
    case OperatorKind::Diagonal: return "Diagonal";
    case OperatorKind::Convolution1D: return "Convolution1D";
    case OperatorKind::RffFeatures: return "RffFeatures";
    case OperatorKind::ConstraintJacobian: return "ConstraintJacobian";
    case OperatorKind::Stacked: return "Stacked";
    case OperatorKind::Adjointed: return "Adjointed";
    case OperatorKind::Scaled: return "Scaled";
    case OperatorKind::Composed: return "Composed";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator::LinearOperator(Index rows, Index cols, Vector params)
    : rows_(rows), cols_(cols), params_(std::move(params)) {
  if (rows < 1 || cols < 1) throw ValidationError("operator dimensions must be positive");
}

Vector LinearOperator::apply_forward(const Vector& v) const {
  if (v.size() != cols_) throw ShapeError("apply_forward", cols_, v.size());
  Vector out(rows_);
  forward(v, out);
  return out;
}

Vector LinearOperator::apply_adjoint(const Vector& u) const {
  if (u.size() != rows_) throw ShapeError("apply_adjoint", rows_, u.size());
  Vector out(cols_);
  adjoint(u, out);
  return out;
}

VectorF LinearOperator::apply_forward(const VectorF& v) const {
  if (v.size() != cols_) throw ShapeError("apply_forward", cols_, v.size());
  VectorF out(rows_);
  forward_single(v, out);
  return out;
}

VectorF LinearOperator::apply_adjoint(const VectorF& u) const {
  if (u.size() != rows_) throw ShapeError("apply_adjoint", rows_, u.size());
  VectorF out(cols_);
  adjoint_single(u, out);
  return out;
}

Vector LinearOperator::param_inner_grad(const Vector& u, const Vector& v) const {
  if (!has_param_inner_grad()) {
    throw UnsupportedCapability(to_string(kind()) + " operator has no parameter-gradient hook");
  }
  if (u.size() != rows_) throw ShapeError("param_inner_grad(u)", rows_, u.size());
  if (v.size() != cols_) throw ShapeError("param_inner_grad(v)", cols_, v.size());
  Vector out = Vector::Zero(num_params());
  param_grad(u, v, out);
  return out;
}

OperatorPtr LinearOperator::with_params(const Vector& params) const {
  if (num_params() == 0 && params.size() == 0) return shared_from_this();
  throw UnsupportedCapability(to_string(kind()) + " operator cannot be re-parameterized");
}

Matrix LinearOperator::to_dense() const {
  Matrix out(rows_, cols_);
  Vector e = Vector::Zero(cols_);
  for (Index j = 0; j < cols_; ++j) {
    e[j] = 1.0;
    out.col(j) = apply_forward(e);
    e[j] = 0.0;
  }
  return out;
}

void LinearOperator::forward_single(const VectorF& v, VectorF& out) const {
  Vector tmp(rows_);
  forward(v.cast<double>(), tmp);
  out = tmp.cast<float>();
}

void LinearOperator::adjoint_single(const VectorF& u, VectorF& out) const {
  Vector tmp(cols_);
  adjoint(u.cast<double>(), tmp);
  out = tmp.cast<float>();
}

void LinearOperator::param_grad(const Vector&, const Vector&, Vector&) const {
  throw UnsupportedCapability(to_string(kind()) + " operator has no parameter-gradient hook");
}

void LinearOperator::check_param_size(const Vector& params) const {
  if (params.size() != num_params()) throw ShapeError("with_params", num_params(), params.size());
}

// ---------------------------------------------------------------------------
// Dense

DenseOperator::DenseOperator(Matrix matrix, bool parameterized)
    : LinearOperator(matrix.rows(), matrix.cols(), parameterized ? vectorized(matrix) : Vector()),
      matrix_(std::move(matrix)),
      matrix_single_(matrix_.cast<float>()),
      parameterized_(parameterized) {}

OperatorPtr DenseOperator::with_params(const Vector& params) const {
  if (!parameterized_) return LinearOperator::with_params(params);
  check_param_size(params);
  Matrix m = Eigen::Map<const Matrix>(params.data(), rows(), cols());
  return std::make_shared<DenseOperator>(std::move(m), true);
}

void DenseOperator::forward(const Vector& v, Vector& out) const { out.noalias() = matrix_ * v; }
void DenseOperator::adjoint(const Vector& u, Vector& out) const { out.noalias() = matrix_.transpose() * u; }
void DenseOperator::forward_single(const VectorF& v, VectorF& out) const { out.noalias() = matrix_single_ * v; }
void DenseOperator::adjoint_single(const VectorF& u, VectorF& out) const {
  out.noalias() = matrix_single_.transpose() * u;
}

void DenseOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  Eigen::Map<Matrix> g(out.data(), rows(), cols());
  g.noalias() = u * v.transpose();
}

// ---------------------------------------------------------------------------
// Diagonal

DiagonalOperator::DiagonalOperator(Vector diagonal, bool parameterized)
    : LinearOperator(diagonal.size(), diagonal.size(), parameterized ? diagonal : Vector()),
      diagonal_(std::move(diagonal)),
      parameterized_(parameterized) {}

OperatorPtr DiagonalOperator::with_params(const Vector& params) const {
  if (!parameterized_) return LinearOperator::with_params(params);
  check_param_size(params);
  return std::make_shared<DiagonalOperator>(params, true);
}

void DiagonalOperator::forward(const Vector& v, Vector& out) const { out = diagonal_.cwiseProduct(v); }
void DiagonalOperator::adjoint(const Vector& u, Vector& out) const { out = diagonal_.cwiseProduct(u); }
void DiagonalOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  out = u.cwiseProduct(v);
}

// ---------------------------------------------------------------------------
// Convolution1D

Convolution1D::Convolution1D(Vector kernel, Index n) : LinearOperator(n, n, std::move(kernel)) {
  if (params().size() < 1 || params().size() > n) {
    throw ValidationError("convolution kernel length must lie in [1, n]");
  }
}

OperatorPtr Convolution1D::with_params(const Vector& params) const {
  check_param_size(params);
  return std::make_shared<Convolution1D>(params, rows());
}

void Convolution1D::forward(const Vector& v, Vector& out) const {
  const Index n = rows();
  const Vector& k = params();
  out.setZero();
  for (Index j = 0; j < k.size(); ++j) {
    // out_i += k_j v_{i-j}: split the wrap-around into two contiguous segments.
    out.segment(j, n - j) += k[j] * v.head(n - j);
    if (j > 0) out.head(j) += k[j] * v.tail(j);
  }
}

void Convolution1D::adjoint(const Vector& u, Vector& out) const {
  const Index n = rows();
  const Vector& k = params();
  out.setZero();
  for (Index j = 0; j < k.size(); ++j) {
    // out_i += k_j u_{i+j}
    out.head(n - j) += k[j] * u.segment(j, n - j);
    if (j > 0) out.tail(j) += k[j] * u.head(j);
  }
}

void Convolution1D::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  const Index n = rows();
  for (Index j = 0; j < out.size(); ++j) {
    double s = u.segment(j, n - j).dot(v.head(n - j));
    if (j > 0) s += u.head(j).dot(v.tail(j));
    out[j] = s;
  }
}

// ---------------------------------------------------------------------------
// Stacked

namespace {
Index stacked_rows(const std::vector<OperatorPtr>& blocks) {
  if (blocks.empty()) throw ValidationError("stacked operator needs at least one block");
  Index rows = 0;
  for (const auto& b : blocks) {
    if (b->cols() != blocks.front()->cols()) throw ShapeError("stacked block cols", blocks.front()->cols(), b->cols());
    rows += b->rows();
  }
  return rows;
}
}  // namespace

StackedOperator::StackedOperator(std::vector<OperatorPtr> blocks)
    : LinearOperator(stacked_rows(blocks), blocks.front()->cols(), concat_params(blocks)), blocks_(std::move(blocks)) {}

bool StackedOperator::has_param_inner_grad() const {
  for (const auto& b : blocks_) {
    if (b->num_params() > 0 && !b->has_param_inner_grad()) return false;
  }
  return true;
}

OperatorPtr StackedOperator::with_params(const Vector& params) const {
  check_param_size(params);
  std::vector<OperatorPtr> next;
  Index offset = 0;
  for (const auto& b : blocks_) {
    next.push_back(b->with_params(params.segment(offset, b->num_params())));
    offset += b->num_params();
  }
  return std::make_shared<StackedOperator>(std::move(next));
}

void StackedOperator::forward(const Vector& v, Vector& out) const {
  Index row = 0;
  for (const auto& b : blocks_) {
    Vector part(b->rows());
    forward_of(*b, v, part);
    out.segment(row, b->rows()) = part;
    row += b->rows();
  }
}

void StackedOperator::adjoint(const Vector& u, Vector& out) const {
  out.setZero();
  Index row = 0;
  Vector part(cols());
  for (const auto& b : blocks_) {
    adjoint_of(*b, u.segment(row, b->rows()), part);
    out += part;
    row += b->rows();
  }
}

void StackedOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  Index row = 0;
  Index offset = 0;
  for (const auto& b : blocks_) {
    if (b->num_params() > 0) {
      Vector part = Vector::Zero(b->num_params());
      param_grad_of(*b, u.segment(row, b->rows()), v, part);
      out.segment(offset, b->num_params()) = part;
    }
    row += b->rows();
    offset += b->num_params();
  }
}

// ---------------------------------------------------------------------------
// Adjointed

AdjointedOperator::AdjointedOperator(OperatorPtr inner)
    : LinearOperator(inner->cols(), inner->rows(), inner->params()), inner_(std::move(inner)) {}

OperatorPtr AdjointedOperator::with_params(const Vector& params) const {
  return std::make_shared<AdjointedOperator>(inner_->with_params(params));
}

void AdjointedOperator::forward(const Vector& v, Vector& out) const { adjoint_of(*inner_, v, out); }
void AdjointedOperator::adjoint(const Vector& u, Vector& out) const { forward_of(*inner_, u, out); }
void AdjointedOperator::forward_single(const VectorF& v, VectorF& out) const { adjoint_single_of(*inner_, v, out); }
void AdjointedOperator::adjoint_single(const VectorF& u, VectorF& out) const { forward_single_of(*inner_, u, out); }

// <u, A^T v> = <v, A u>
void AdjointedOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  param_grad_of(*inner_, v, u, out);
}

// ---------------------------------------------------------------------------
// Scaled

namespace {
Vector scaled_params(double alpha, const OperatorPtr& inner, bool alpha_is_param) {
  if (!alpha_is_param) return inner->params();
  Vector p(inner->num_params() + 1);
  p[0] = alpha;
  p.tail(inner->num_params()) = inner->params();
  return p;
}
}  // namespace

ScaledOperator::ScaledOperator(double alpha, OperatorPtr inner, bool alpha_is_param)
    : LinearOperator(inner->rows(), inner->cols(), scaled_params(alpha, inner, alpha_is_param)),
      alpha_(alpha),
      inner_(std::move(inner)),
      alpha_is_param_(alpha_is_param) {}

bool ScaledOperator::has_param_inner_grad() const {
  return inner_->num_params() == 0 || inner_->has_param_inner_grad();
}

OperatorPtr ScaledOperator::with_params(const Vector& params) const {
  check_param_size(params);
  if (!alpha_is_param_) return std::make_shared<ScaledOperator>(alpha_, inner_->with_params(params), false);
  auto inner = inner_->with_params(params.tail(params.size() - 1));
  return std::make_shared<ScaledOperator>(params[0], std::move(inner), true);
}

void ScaledOperator::forward(const Vector& v, Vector& out) const {
  forward_of(*inner_, v, out);
  out *= alpha_;
}

void ScaledOperator::adjoint(const Vector& u, Vector& out) const {
  adjoint_of(*inner_, u, out);
  out *= alpha_;
}

void ScaledOperator::forward_single(const VectorF& v, VectorF& out) const {
  forward_single_of(*inner_, v, out);
  out *= static_cast<float>(alpha_);
}

void ScaledOperator::adjoint_single(const VectorF& u, VectorF& out) const {
  adjoint_single_of(*inner_, u, out);
  out *= static_cast<float>(alpha_);
}

void ScaledOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  Index offset = 0;
  if (alpha_is_param_) {
    Vector av(rows());
    forward_of(*inner_, v, av);
    out[0] = u.dot(av);
    offset = 1;
  }
  if (inner_->num_params() > 0) {
    Vector part = Vector::Zero(inner_->num_params());
    param_grad_of(*inner_, u, v, part);
    out.segment(offset, inner_->num_params()) = alpha_ * part;
  }
}

// ---------------------------------------------------------------------------
// Composed

namespace {
Index composed_rows(const OperatorPtr& outer, const OperatorPtr& inner) {
  if (outer->cols() != inner->rows()) throw ShapeError("composed operator inner rows", outer->cols(), inner->rows());
  return outer->rows();
}
}  // namespace

ComposedOperator::ComposedOperator(OperatorPtr outer, OperatorPtr inner)
    : LinearOperator(composed_rows(outer, inner), inner->cols(), concat_params({outer, inner})),
      outer_(std::move(outer)),
      inner_(std::move(inner)) {}

bool ComposedOperator::has_param_inner_grad() const {
  return (outer_->num_params() == 0 || outer_->has_param_inner_grad()) &&
         (inner_->num_params() == 0 || inner_->has_param_inner_grad());
}

OperatorPtr ComposedOperator::with_params(const Vector& params) const {
  check_param_size(params);
  auto outer = outer_->with_params(params.head(outer_->num_params()));
  auto inner = inner_->with_params(params.tail(inner_->num_params()));
  return std::make_shared<ComposedOperator>(std::move(outer), std::move(inner));
}

void ComposedOperator::forward(const Vector& v, Vector& out) const {
  Vector mid(inner_->rows());
  forward_of(*inner_, v, mid);
  forward_of(*outer_, mid, out);
}

void ComposedOperator::adjoint(const Vector& u, Vector& out) const {
  Vector mid(outer_->cols());
  adjoint_of(*outer_, u, mid);
  adjoint_of(*inner_, mid, out);
}

void ComposedOperator::forward_single(const VectorF& v, VectorF& out) const {
  VectorF mid(inner_->rows());
  forward_single_of(*inner_, v, mid);
  forward_single_of(*outer_, mid, out);
}

void ComposedOperator::adjoint_single(const VectorF& u, VectorF& out) const {
  VectorF mid(outer_->cols());
  adjoint_single_of(*outer_, u, mid);
  adjoint_single_of(*inner_, mid, out);
}

// <u, B C v>: d/d theta_B = grad_B(u, C v), d/d theta_C = grad_C(B^T u, v).
void ComposedOperator::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  const Index po = outer_->num_params();
  const Index pi = inner_->num_params();
  if (po > 0) {
    Vector cv(inner_->rows());
    forward_of(*inner_, v, cv);
    Vector part = Vector::Zero(po);
    param_grad_of(*outer_, u, cv, part);
    out.head(po) = part;
  }
  if (pi > 0) {
    Vector btu(outer_->cols());
    adjoint_of(*outer_, u, btu);
    Vector part = Vector::Zero(pi);
    param_grad_of(*inner_, btu, v, part);
    out.tail(pi) = part;
  }
}

// ---------------------------------------------------------------------------
// Factories and checks

OperatorPtr make_dense(Matrix matrix, bool parameterized) {
  return std::make_shared<DenseOperator>(std::move(matrix), parameterized);
}
OperatorPtr make_diagonal(Vector diagonal, bool parameterized) {
  return std::make_shared<DiagonalOperator>(std::move(diagonal), parameterized);
}
OperatorPtr make_convolution(Vector kernel, Index n) { return std::make_shared<Convolution1D>(std::move(kernel), n); }
OperatorPtr identity(Index n) { return make_diagonal(Vector::Ones(n), false); }
OperatorPtr adjointed(OperatorPtr op) { return std::make_shared<AdjointedOperator>(std::move(op)); }
OperatorPtr scaled(double alpha, OperatorPtr op, bool alpha_is_param) {
  return std::make_shared<ScaledOperator>(alpha, std::move(op), alpha_is_param);
}
OperatorPtr stacked(std::vector<OperatorPtr> blocks) { return std::make_shared<StackedOperator>(std::move(blocks)); }

OperatorPtr composed(OperatorPtr outer, OperatorPtr inner) {
  return std::make_shared<ComposedOperator>(std::move(outer), std::move(inner));
}

OperatorPtr stack_tikhonov(OperatorPtr op, double lambda) {
  const Index n = op->cols();
  return stacked({std::move(op), scaled(lambda, identity(n))});
}

namespace {
template <class Fn>
void for_each_dot_trial(const LinearOperator& op, int trials, std::uint64_t seed, Fn&& fn) {
  if (trials < 1) throw ValidationError("dot_test needs at least one trial");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector u(op.rows());
  Vector v(op.cols());
  for (int t = 0; t < trials; ++t) {
    for (Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    const double lhs = u.dot(op.apply_forward(v));
    const double rhs = op.apply_adjoint(u).dot(v);
    fn(std::abs(lhs - rhs), u.norm() * v.norm());
  }
}
}  // namespace

double dot_test(const LinearOperator& op, int trials, std::uint64_t seed) {
  double worst = 0.0;
  for_each_dot_trial(op, trials, seed, [&](double d, double) { worst = std::max(worst, d); });
  return worst;
}

double dot_test_relative(const LinearOperator& op, int trials, std::uint64_t seed) {
  const double anorm = std::max(estimate_norm(op), std::numeric_limits<double>::min());
  double worst = 0.0;
  for_each_dot_trial(op, trials, seed, [&](double d, double uv) { worst = std::max(worst, d / (uv * anorm)); });
  return worst;
}

double estimate_norm(const LinearOperator& op, int iterations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(op.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double vn = v.norm();
    if (vn == 0.0) return 0.0;
    v /= vn;
    Vector av = op.apply_forward(v);
    sigma = av.norm();
    v = op.apply_adjoint(av);
  }
  return sigma;
}

}  // namespace difflsq
