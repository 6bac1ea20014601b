#include "difflsq/solvers.hpp"

#include "difflsq/bidiag.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace difflsq {

std::string to_string(Precision p) { return p == Precision::Single ? "single" : "double"; }
std::string to_string(ProblemMode mode) { return mode == ProblemMode::Tall ? "tall" : "wide"; }

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Converged: return "Converged";
    case StopReason::MaxIter: return "MaxIter";
    case StopReason::ConLimExceeded: return "ConLimExceeded";
    case StopReason::ExactBreakdown: return "ExactBreakdown";
  }
  return "Unknown";
}

Precision parse_precision(const std::string& name) {
  if (name == "single" || name == "float32" || name == "f32") return Precision::Single;
  if (name == "double" || name == "float64" || name == "f64") return Precision::Double;
  throw ValidationError("unknown precision '" + name + "'");
}

void LstSqProblem::validate() const {
  if (!op) throw ValidationError("least-squares problem without operator");
  if (b.size() != op->rows()) throw ShapeError("right-hand side", op->rows(), b.size());
  if (!b.allFinite()) throw ValidationError("right-hand side has non-finite entries");
  if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("lambda must be finite and >= 0");
}

Index SolveConfig::iteration_cap(const LinearOperator& op) const {
  return max_iter > 0 ? max_iter : 2 * std::min(op.rows(), op.cols()) + 100;
}

void SolveConfig::validate() const {
  if (!(atol > 0.0) || !(btol > 0.0) || !(conlim > 0.0)) throw ValidationError("solver tolerances must be positive");
  if (max_iter < 0) throw ValidationError("max_iter must be >= 1 (or 0 for the default)");
}

namespace {

struct Givens {
  double c;
  double s;
  double r;
};

// Stable plane rotation with [c s; -s c] [a; b] = [r; 0].
Givens sym_ortho(double a, double b) {
  if (b == 0.0) return {std::copysign(1.0, a), 0.0, std::abs(a)};
  if (a == 0.0) return {0.0, std::copysign(1.0, b), std::abs(b)};
  if (std::abs(b) > std::abs(a)) {
    const double tau = a / b;
    const double s = std::copysign(1.0, b) / std::sqrt(1.0 + tau * tau);
    return {s * tau, s, b / s};
  }
  const double tau = b / a;
  const double c = std::copysign(1.0, a) / std::sqrt(1.0 + tau * tau);
  return {c, c * tau, a / c};
}

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Regularized LSMR. Vectors live in Scalar, recurrence scalars in double.
template <class Scalar>
SolveReport lsmr_impl(const LstSqProblem& problem, const SolveConfig& cfg) {
  const LinearOperator& op = *problem.op;
  const Index n = op.cols();
  const double damp = problem.lambda;
  const Index max_iter = cfg.iteration_cap(op);

  SolveReport report;
  report.x = Vector::Zero(n);
  const Vec<Scalar> b = problem.b.template cast<Scalar>();
  const double normb = detail::norm2(b);
  if (normb == 0.0) return report;

  BidiagState<Scalar> gk = gk_init(op, b, 0.0);
  double alpha = gk.alpha;
  double beta = gk.beta;

  Vec<Scalar> x = Vec<Scalar>::Zero(n);
  Vec<Scalar> h = gk.v;
  Vec<Scalar> hbar = Vec<Scalar>::Zero(n);

  double zetabar = alpha * beta;
  double alphabar = alpha;
  double rho = 1.0;
  double rhobar = 1.0;
  double cbar = 1.0;
  double sbar = 0.0;

  // ||r|| estimation.
  double betadd = beta;
  double betad = 0.0;
  double rhodold = 1.0;
  double tautildeold = 0.0;
  double thetatilde = 0.0;
  double zeta = 0.0;
  double d = 0.0;

  double norm_a2 = alpha * alpha;
  double maxrbar = 0.0;
  double minrbar = std::numeric_limits<double>::max();
  double norm_a = std::sqrt(norm_a2);
  double cond_a = 1.0;
  double normr = beta;
  double normar = alpha * beta;
  const double ctol = 1.0 / cfg.conlim;

  report.resid_norm = normr;
  report.normal_resid_norm = normar;
  if (normar == 0.0) {
    report.stop_reason = gk.breakdown ? StopReason::ExactBreakdown : StopReason::Converged;
    return report;
  }

  StopReason stop = StopReason::MaxIter;
  bool stopped = false;
  Index itn = 0;
  while (itn < max_iter) {
    ++itn;
    gk = gk_step(op, gk);
    beta = gk.beta;
    alpha = gk.alpha;

    // Rotation eliminating the damping term.
    const Givens hat = sym_ortho(alphabar, damp);
    const double chat = hat.c;
    const double shat = hat.s;
    const double alphahat = hat.r;

    const double rhoold = rho;
    const Givens g = sym_ortho(alphahat, beta);
    rho = g.r;
    const double thetanew = g.s * alpha;
    alphabar = g.c * alpha;

    const double rhobarold = rhobar;
    const double zetaold = zeta;
    const double thetabar = sbar * rho;
    const double rhotemp = cbar * rho;
    const Givens gbar = sym_ortho(cbar * rho, thetanew);
    cbar = gbar.c;
    sbar = gbar.s;
    rhobar = gbar.r;
    zeta = cbar * zetabar;
    zetabar = -sbar * zetabar;

    hbar = h - static_cast<Scalar>(thetabar * rho / (rhoold * rhobarold)) * hbar;
    x += static_cast<Scalar>(zeta / (rho * rhobar)) * hbar;
    h = gk.v - static_cast<Scalar>(thetanew / rho) * h;

    const double betaacute = chat * betadd;
    const double betacheck = -shat * betadd;
    const double betahat = g.c * betaacute;
    betadd = -g.s * betaacute;

    const double thetatildeold = thetatilde;
    const Givens gtilde = sym_ortho(rhodold, thetabar);
    thetatilde = gtilde.s * rhobar;
    rhodold = gtilde.c * rhobar;
    betad = -gtilde.s * betad + gtilde.c * betahat;

    tautildeold = (zetaold - thetatildeold * tautildeold) / gtilde.r;
    const double taud = (zeta - thetatilde * tautildeold) / rhodold;
    d += betacheck * betacheck;
    normr = std::sqrt(d + (betad - taud) * (betad - taud) + betadd * betadd);

    norm_a2 += beta * beta;
    norm_a = std::sqrt(norm_a2);
    norm_a2 += alpha * alpha;

    maxrbar = std::max(maxrbar, rhobarold);
    if (itn > 1) minrbar = std::min(minrbar, rhobarold);
    cond_a = std::max(maxrbar, rhotemp) / std::min(minrbar, rhotemp);

    normar = std::abs(zetabar);
    const double normx = detail::norm2(x);
    report.normal_resid_history.push_back(normar);

    const double test1 = normr / normb;
    const double test2 = norm_a * normr != 0.0 ? normar / (norm_a * normr) : std::numeric_limits<double>::infinity();
    const double test3 = 1.0 / cond_a;
    const double t1 = test1 / (1.0 + norm_a * normx / normb);
    const double rtol = cfg.btol + cfg.atol * norm_a * normx / normb;

    if (test1 <= rtol || test2 <= cfg.atol || normar == 0.0) {
      stop = StopReason::Converged;
      stopped = true;
    } else if (test3 <= ctol) {
      stop = StopReason::ConLimExceeded;
      stopped = true;
    } else if (1.0 + t1 <= 1.0 || 1.0 + test2 <= 1.0) {
      // Tolerances below machine precision: the iterate cannot improve further.
      stop = StopReason::Converged;
      stopped = true;
    } else if (1.0 + test3 <= 1.0) {
      stop = StopReason::ConLimExceeded;
      stopped = true;
    } else if (gk.breakdown) {
      stop = StopReason::ExactBreakdown;
      stopped = true;
    }
    if (stopped) break;
  }

  report.x = x.template cast<double>();
  report.iterations = itn;
  report.resid_norm = normr;
  report.normal_resid_norm = normar;
  report.anorm_est = norm_a;
  report.cond_est = cond_a;
  report.stop_reason = stopped ? stop : StopReason::MaxIter;
  return report;
}

template <class Scalar>
double dot2(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return a.dot(b);
  } else {
    return a.template cast<double>().dot(b.template cast<double>());
  }
}

// CG on the normal equations, tall form: (A^T A + l^2 I) x = A^T b.
template <class Scalar>
SolveReport cgls_tall(const LstSqProblem& problem, const SolveConfig& cfg) {
  const LinearOperator& op = *problem.op;
  const double lam2 = problem.lambda * problem.lambda;
  const Index max_iter = cfg.iteration_cap(op);

  SolveReport report;
  report.x = Vector::Zero(op.cols());
  Vec<Scalar> r = problem.b.template cast<Scalar>();
  const double normb = detail::norm2(r);
  if (normb == 0.0) return report;

  Vec<Scalar> x = Vec<Scalar>::Zero(op.cols());
  Vec<Scalar> s = op.apply_adjoint(r);
  Vec<Scalar> p = s;
  double gamma = dot2<Scalar>(s, s);
  double norm_a = 0.0;
  double normr = normb;
  double norms = std::sqrt(gamma);

  StopReason stop = StopReason::MaxIter;
  Index itn = 0;
  while (itn < max_iter && norms > 0.0) {
    ++itn;
    const Vec<Scalar> q = op.apply_forward(p);
    const double pp = dot2<Scalar>(p, p);
    const double delta = dot2<Scalar>(q, q) + lam2 * pp;
    if (delta <= 0.0) {
      stop = StopReason::ExactBreakdown;
      break;
    }
    norm_a = std::max(norm_a, std::sqrt(dot2<Scalar>(q, q) / pp));
    const double step = gamma / delta;
    x += static_cast<Scalar>(step) * p;
    r -= static_cast<Scalar>(step) * q;
    s = op.apply_adjoint(r);
    if (lam2 != 0.0) s -= static_cast<Scalar>(lam2) * x;
    const double gamma_new = dot2<Scalar>(s, s);
    p = s + static_cast<Scalar>(gamma_new / gamma) * p;
    gamma = gamma_new;

    norms = std::sqrt(gamma);
    const double normx = detail::norm2(x);
    normr = std::sqrt(dot2<Scalar>(r, r) + lam2 * normx * normx);
    report.normal_resid_history.push_back(norms);
    if (normr <= cfg.btol * normb + cfg.atol * norm_a * normx || norms <= cfg.atol * norm_a * normr) {
      stop = StopReason::Converged;
      break;
    }
  }
  if (norms == 0.0) stop = StopReason::Converged;

  report.x = x.template cast<double>();
  report.iterations = itn;
  report.resid_norm = normr;
  report.normal_resid_norm = norms;
  report.anorm_est = norm_a;
  report.stop_reason = stop;
  return report;
}

// CG on (A A^T + l^2 I) y = b with x = A^T y, for wide A.
template <class Scalar>
SolveReport cgls_wide(const LstSqProblem& problem, const SolveConfig& cfg) {
  const LinearOperator& op = *problem.op;
  const double lam2 = problem.lambda * problem.lambda;
  const Index max_iter = cfg.iteration_cap(op);

  SolveReport report;
  report.x = Vector::Zero(op.cols());
  Vec<Scalar> r = problem.b.template cast<Scalar>();
  const double normb = detail::norm2(r);
  if (normb == 0.0) return report;

  Vec<Scalar> x = Vec<Scalar>::Zero(op.cols());
  Vec<Scalar> p = r;
  double gamma = dot2<Scalar>(r, r);
  double norm_a = 0.0;
  double normr = normb;

  StopReason stop = StopReason::MaxIter;
  Index itn = 0;
  while (itn < max_iter) {
    ++itn;
    const Vec<Scalar> q = op.apply_adjoint(p);
    Vec<Scalar> w = op.apply_forward(q);
    if (lam2 != 0.0) w += static_cast<Scalar>(lam2) * p;
    const double delta = dot2<Scalar>(p, w);
    if (delta <= 0.0) {
      stop = StopReason::ExactBreakdown;
      break;
    }
    norm_a = std::max(norm_a, std::sqrt(dot2<Scalar>(q, q) / dot2<Scalar>(p, p)));
    const double step = gamma / delta;
    x += static_cast<Scalar>(step) * q;
    r -= static_cast<Scalar>(step) * w;
    const double gamma_new = dot2<Scalar>(r, r);
    p = r + static_cast<Scalar>(gamma_new / gamma) * p;
    gamma = gamma_new;
    normr = std::sqrt(gamma);
    report.normal_resid_history.push_back(normr);
    if (normr <= cfg.btol * normb || normr == 0.0) {
      stop = StopReason::Converged;
      break;
    }
  }

  report.x = x.template cast<double>();
  report.iterations = itn;
  report.resid_norm = normr;
  report.normal_resid_norm = normr;
  report.anorm_est = norm_a;
  report.stop_reason = stop;
  return report;
}

}  // namespace

SolveReport lsmr(const LstSqProblem& problem, const SolveConfig& cfg) {
  problem.validate();
  cfg.validate();
  return cfg.precision == Precision::Single ? lsmr_impl<float>(problem, cfg) : lsmr_impl<double>(problem, cfg);
}

SolveReport cgls(const LstSqProblem& problem, const SolveConfig& cfg) {
  problem.validate();
  cfg.validate();
  if (problem.mode() == ProblemMode::Tall) {
    return cfg.precision == Precision::Single ? cgls_tall<float>(problem, cfg) : cgls_tall<double>(problem, cfg);
  }
  return cfg.precision == Precision::Single ? cgls_wide<float>(problem, cfg) : cgls_wide<double>(problem, cfg);
}

namespace {

// Upper-triangular factor of a tall full-rank matrix, with a rank check.
Eigen::HouseholderQR<Matrix> checked_qr(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  const Vector diag = qr.matrixQR().diagonal().cwiseAbs();
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon() *
                     diag.maxCoeff();
  if (diag.size() == 0 || diag.minCoeff() <= tol) {
    throw RankDeficient("matrix is rank deficient to machine precision");
  }
  return qr;
}

}  // namespace

Vector dense_lstsq(const Matrix& a, const Vector& b, double lambda) {
  if (b.size() != a.rows()) throw ShapeError("dense_lstsq(b)", a.rows(), b.size());
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  const Index m = a.rows();
  const Index n = a.cols();

  if (m >= n) {
    // QR of [A; lambda I], then R x = Q^T [b; 0].
    Matrix stacked_a(m + n, n);
    stacked_a << a, lambda * Matrix::Identity(n, n);
    Vector rhs = Vector::Zero(m + n);
    rhs.head(m) = b;
    const auto qr = checked_qr(stacked_a);
    const Vector qtb = (qr.householderQ().transpose() * rhs).head(n);
    return qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>().solve(qtb);
  }

  // Wide: x = A^T (A A^T + lambda^2 I)^{-1} b with R^T R = A A^T + lambda^2 I
  // from the QR of [A^T; lambda I].
  Matrix stacked_at(n + m, m);
  stacked_at << a.transpose(), lambda * Matrix::Identity(m, m);
  const auto qr = checked_qr(stacked_at);
  const auto r = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  Vector y = r.transpose().solve(b);
  y = r.solve(y);
  return a.transpose() * y;
}

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Vector gaussian_vector(Index size, std::uint64_t seed) { return gaussian_matrix(size, 1, seed).col(0); }

Matrix make_illconditioned(Index m, Index n, double cond, std::uint64_t seed) {
  if (!(cond >= 1.0)) throw ValidationError("condition number must be >= 1");
  const Index r = std::min(m, n);
  const Matrix g1 = gaussian_matrix(m, r, seed);
  const Matrix g2 = gaussian_matrix(n, r, seed ^ 0x9e3779b97f4a7c15ULL);
  const Matrix q1 = Eigen::HouseholderQR<Matrix>(g1).householderQ() * Matrix::Identity(m, r);
  const Matrix q2 = Eigen::HouseholderQR<Matrix>(g2).householderQ() * Matrix::Identity(n, r);
  Vector sigma(r);
  for (Index i = 0; i < r; ++i) {
    const double t = r > 1 ? static_cast<double>(i) / static_cast<double>(r - 1) : 0.0;
    sigma[i] = std::pow(cond, t);
  }
  return q1 * sigma.asDiagonal() * q2.transpose();
}

}  // namespace difflsq
