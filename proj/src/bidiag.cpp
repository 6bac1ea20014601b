#include "difflsq/bidiag.hpp"

namespace difflsq {

namespace {

// One pass of classical Gram-Schmidt against the first `count` columns.
void orthogonalize(const Matrix& basis, Index count, Vector& x) {
  if (count == 0) return;
  const Vector coeffs = basis.leftCols(count).transpose() * x;
  x.noalias() -= basis.leftCols(count) * coeffs;
}

}  // namespace

BidiagFactors gk_factor(const LinearOperator& op, const Vector& b, Index k, bool reorthogonalize) {
  if (k < 1 || k > std::min(op.rows(), op.cols())) {
    throw ValidationError("gk_factor: k must lie in [1, min(m, n)]");
  }
  const Index m = op.rows();
  const Index n = op.cols();

  Matrix U = Matrix::Zero(m, k + 1);
  Matrix V = Matrix::Zero(n, k);
  Vector alphas = Vector::Zero(k);
  Vector betas = Vector::Zero(k + 1);

  BidiagState<double> s = gk_init(op, b);
  const double anorm = s.anorm_est;
  U.col(0) = s.u;
  betas[0] = s.beta;

  Index rank = 0;
  bool exact = s.breakdown;
  if (!exact) {
    V.col(0) = s.v;
    alphas[0] = s.alpha;
    rank = 1;
  }

  while (!exact && rank < k) {
    // beta_{j+1} u_{j+1} = A v_j - alpha_j u_j
    Vector u = op.apply_forward(Vector(V.col(rank - 1)));
    u -= alphas[rank - 1] * U.col(rank - 1);
    if (reorthogonalize) orthogonalize(U, rank, u);
    const double beta = u.norm();
    betas[rank] = beta;
    if (beta <= kBreakdownFactor * anorm) {
      exact = true;
      break;
    }
    U.col(rank) = u / beta;

    // alpha_{j+1} v_{j+1} = A^T u_{j+1} - beta_{j+1} v_j
    Vector v = op.apply_adjoint(Vector(U.col(rank)));
    v -= beta * V.col(rank - 1);
    if (reorthogonalize) orthogonalize(V, rank, v);
    const double alpha = v.norm();
    if (alpha <= kBreakdownFactor * anorm) {
      // A V_j = U_{j+1} B_j is exact; there is no further right vector.
      BidiagFactors f;
      f.rank = rank;
      f.exact = true;
      f.U = U.leftCols(rank + 1);
      f.V = V.leftCols(rank);
      f.alphas = alphas.head(rank);
      f.betas = betas.head(rank + 1);
      f.B = Matrix::Zero(rank + 1, rank);
      for (Index i = 0; i < rank; ++i) {
        f.B(i, i) = f.alphas[i];
        f.B(i + 1, i) = f.betas[i + 1];
      }
      return f;
    }
    V.col(rank) = v / alpha;
    alphas[rank] = alpha;
    ++rank;
  }

  if (!exact) {
    // Complete the final beta_{k+1} u_{k+1} for the rectangular form.
    Vector u = op.apply_forward(Vector(V.col(k - 1)));
    u -= alphas[k - 1] * U.col(k - 1);
    if (reorthogonalize) orthogonalize(U, k, u);
    const double beta = u.norm();
    betas[k] = beta;
    if (beta <= kBreakdownFactor * anorm) {
      exact = true;
    } else {
      U.col(k) = u / beta;
    }
  }

  BidiagFactors f;
  f.rank = rank;
  f.exact = exact;
  f.alphas = alphas.head(rank);
  if (exact) {
    f.U = U.leftCols(rank);
    f.V = V.leftCols(rank);
    f.betas = betas.head(rank + 1);
    f.B = Matrix::Zero(rank, rank);
  } else {
    f.U = U;
    f.V = V;
    f.betas = betas;
    f.B = Matrix::Zero(rank + 1, rank);
  }
  for (Index i = 0; i < rank; ++i) {
    f.B(i, i) = alphas[i];
    if (i + 1 < f.B.rows()) f.B(i + 1, i) = betas[i + 1];
  }
  return f;
}

}  // namespace difflsq
