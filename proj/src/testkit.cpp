#include "difflsq/testkit.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace difflsq {

namespace {

std::string non_finite_message(Index coordinate, double value) {
  std::ostringstream os;
  os << "finite differences: non-finite value " << value << " when perturbing coordinate " << coordinate;
  return os.str();
}

void require_full_rank(const Eigen::HouseholderQR<Matrix>& qr, Index k) {
  const Vector diag = qr.matrixQR().diagonal().head(k).cwiseAbs();
  const double tol = static_cast<double>(std::max(qr.rows(), qr.cols())) *
                     std::numeric_limits<double>::epsilon() * diag.maxCoeff();
  if (diag.minCoeff() <= tol) throw RankDeficient("pseudo-inverse oracle: matrix is rank deficient");
}

class FaultyAdjointOperator final : public LinearOperator {
 public:
  explicit FaultyAdjointOperator(Matrix a) : LinearOperator(a.rows(), a.cols()), a_(std::move(a)) {}
  OperatorKind kind() const override { return OperatorKind::Dense; }

 protected:
  void forward(const Vector& v, Vector& out) const override { out.noalias() = a_ * v; }
  void adjoint(const Vector& u, Vector& out) const override {
    const Vector full = a_.transpose() * u;
    const Index n = full.size();
    for (Index i = 0; i < n; ++i) out[i] = full[(i + 1) % n];
  }

 private:
  Matrix a_;
};

}  // namespace

NonFiniteEvaluation::NonFiniteEvaluation(Index coordinate, double value)
    : std::runtime_error(non_finite_message(coordinate, value)), coordinate_(coordinate) {}

Vector fd_grad(const std::function<double(const Vector&)>& f, const Vector& theta, const FdConfig& cfg) {
  if (!(cfg.h0 > 0.0)) throw ValidationError("finite-difference step must be positive");
  Vector grad(theta.size());
  Vector probe = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double h = cfg.h0 * (1.0 + std::abs(theta[i]));
    probe[i] = theta[i] + h;
    const double fp = f(probe);
    if (!std::isfinite(fp)) throw NonFiniteEvaluation(i, fp);
    probe[i] = theta[i] - h;
    const double fm = f(probe);
    if (!std::isfinite(fm)) throw NonFiniteEvaluation(i, fm);
    probe[i] = theta[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Vector dense_pinv_apply(const Matrix& a, const Vector& v) {
  if (v.size() != a.rows()) throw ShapeError("dense_pinv_apply(v)", a.rows(), v.size());
  if (a.rows() >= a.cols()) {
    // A = Q R: pinv(A) v = R^{-1} Q^T v.
    const Index n = a.cols();
    Eigen::HouseholderQR<Matrix> qr(a);
    require_full_rank(qr, n);
    const Vector qtv = (qr.householderQ().transpose() * v).head(n);
    return qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>().solve(qtv);
  }
  // A^T = Q R: pinv(A) v = Q R^{-T} v.
  const Index m = a.rows();
  Eigen::HouseholderQR<Matrix> qr(a.transpose());
  require_full_rank(qr, m);
  Vector w = Vector::Zero(a.cols());
  w.head(m) = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>().transpose().solve(v);
  return qr.householderQ() * w;
}

Matrix dense_nullspace_projector(const Matrix& a) {
  const Index d = a.cols();
  const Matrix gram = a * a.transpose();
  const Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficient("projector oracle: A A^T is not positive definite");
  return Matrix::Identity(d, d) - a.transpose() * llt.solve(a);
}

RandomProblem random_problem(Index m, Index n, double cond, double lambda, std::uint64_t seed) {
  Matrix dense = make_illconditioned(m, n, cond, seed);
  Vector b = gaussian_vector(m, seed + 7919);
  LstSqProblem problem{make_dense(dense), std::move(b), lambda};
  return {std::move(problem), std::move(dense)};
}

OperatorPtr make_faulty_adjoint(const Matrix& a) { return std::make_shared<FaultyAdjointOperator>(a); }

double relative_error(const Vector& a, const Vector& ref) {
  const double denom = ref.norm();
  const double diff = (a - ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

double relative_error(double a, double ref) {
  const double denom = std::abs(ref);
  const double diff = std::abs(a - ref);
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace difflsq
