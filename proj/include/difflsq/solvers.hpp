#pragma once

#include "difflsq/linop.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace difflsq {

enum class Precision { Single, Double };
enum class ProblemMode { Tall, Wide };
enum class StopReason { Converged, MaxIter, ConLimExceeded, ExactBreakdown };

std::string to_string(Precision p);
std::string to_string(ProblemMode mode);
std::string to_string(StopReason reason);
Precision parse_precision(const std::string& name);

/**
 * min ||A x - b||^2 + lambda^2 ||x||^2 for tall A; for wide A with lambda = 0
 * the minimum-norm solution of A x = b. A is assumed to have full rank.
 */
struct LstSqProblem {
  OperatorPtr op;
  Vector b;
  double lambda = 0.0;

  ProblemMode mode() const { return op->rows() >= op->cols() ? ProblemMode::Tall : ProblemMode::Wide; }
  /// Throws ShapeError / ValidationError for inconsistent or non-finite data.
  void validate() const;
};

struct SolveConfig {
  double atol = 1e-6;
  double btol = 1e-6;
  double conlim = 1e8;
  /// 0 selects the default cap 2 min(m, n) + 100.
  Index max_iter = 0;
  Precision precision = Precision::Double;

  Index iteration_cap(const LinearOperator& op) const;
  void validate() const;
};

struct SolveReport {
  Vector x;
  Index iterations = 0;
  /// ||[A; lambda I] x - [b; 0]||, i.e. the regularized residual.
  double resid_norm = 0.0;
  /// ||A^T r - lambda^2 x|| (estimate maintained by the recurrence).
  double normal_resid_norm = 0.0;
  double anorm_est = 0.0;
  double cond_est = 0.0;
  StopReason stop_reason = StopReason::Converged;
  /// normal_resid_norm after every iteration.
  std::vector<double> normal_resid_history;
};

/// Raised by dense_lstsq / dense oracles for matrices that are rank deficient to machine precision.
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SolveReport lsmr(const LstSqProblem& problem, const SolveConfig& cfg = {});

/// Conjugate gradients on the normal equations (A^T A + lambda^2 I) x = A^T b,
/// or (A A^T + lambda^2 I) y = b, x = A^T y for wide A.
SolveReport cgls(const LstSqProblem& problem, const SolveConfig& cfg = {});

/// Householder-QR reference solution of the same problem on an explicit matrix.
Vector dense_lstsq(const Matrix& a, const Vector& b, double lambda);

/// Q1 diag(s) Q2^T with s log-spaced over [1, cond] and Haar-like Q factors.
Matrix make_illconditioned(Index m, Index n, double cond, std::uint64_t seed);

/// Seeded standard-normal matrix / vector.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);
Vector gaussian_vector(Index size, std::uint64_t seed);

}  // namespace difflsq
