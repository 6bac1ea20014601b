#pragma once

// Random-Fourier-feature GP regression calibrated either by the type-II
// marginal likelihood or by the fit of the predictive mean.

#include "difflsq/adjoint.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace difflsq {

/// Hyperparameters plus the frozen feature randomness.
struct RffModel {
  Index k = 0;
  /// k x d frequencies drawn at unit lengthscale; divided by ell when used.
  Matrix omega;
  /// Per-feature phases in [0, 2 pi).
  Vector phases;
  double sigma = 1.0;
  double ell = 1.0;
  double lambda = 1.0;
  /// Fitted weights, filled by callers that keep them around.
  Vector z_star;

  void validate() const;
  /// (log sigma, log ell, log lambda)
  Vector log_params() const;
  RffModel with_log_params(const Vector& log_params) const;
};

RffModel make_rff_model(Index k, Index input_dim, double sigma, double ell, double lambda, std::uint64_t seed);

/**
 * Phi(x)_{j i} = sigma cos(omega_i . x_j / ell + b_i), parameterized by (sigma, ell).
 *
 * The cosine table and its lengthscale derivative are materialized at
 * construction, so products cost two dense m x k passes.
 */
class RffFeatures final : public LinearOperator {
 public:
  RffFeatures(Matrix inputs, Matrix omega, Vector phases, double sigma, double ell);

  OperatorKind kind() const override { return OperatorKind::RffFeatures; }
  bool has_param_inner_grad() const override { return true; }
  OperatorPtr with_params(const Vector& params) const override;

  double sigma() const { return params()[0]; }
  double ell() const { return params()[1]; }
  /// The m x k feature matrix.
  Matrix features() const { return sigma() * cosines_; }

 protected:
  void forward(const Vector& v, Vector& out) const override;
  void adjoint(const Vector& u, Vector& out) const override;
  void param_grad(const Vector& u, const Vector& v, Vector& out) const override;

 private:
  Matrix inputs_;
  Matrix omega_;
  Vector phases_;
  Matrix cosines_;
  // sin(angle) * (omega_i . x_j), so that d Phi / d ell = sigma / ell^2 * this.
  Matrix dell_;
};

/// Inputs are rows of an m x d matrix.
std::shared_ptr<const RffFeatures> rff_operator(const RffModel& model, const Matrix& inputs);

/// The explicit m x k feature matrix, without the derivative tables.
Matrix feature_matrix(const RffModel& model, const Matrix& inputs);

struct SyntheticDataset {
  Matrix x_train;
  Vector y_train;
  Matrix x_test;
  Vector y_test;
  std::string noise_profile;
};

inline constexpr Index kTrainSize = 1600;
inline constexpr Index kTestSize = 400;

/// cos(2 pi x) + x sin(5 pi x)
double f_true(double x);

/// Noise std (0.05 + 0.25 x) * noise_scale; noise_scale = 0 gives exact targets.
SyntheticDataset make_dataset(std::uint64_t seed, double noise_scale = 1.0, Index n_train = kTrainSize,
                              Index n_test = kTestSize);

/// Which norm penalty the calibration loss uses on z.
enum class PredPenalty { Norm, SquaredNorm };

struct GpSolveSettings {
  SolveConfig solver{1e-5, 1e-5, 1e8, 0, Precision::Double};
  PredPenalty penalty = PredPenalty::Norm;
};

/// z* = LstSq(Phi, y, lambda). Throws SolveFailure if LSMR does not converge.
Vector gp_fit(const RffModel& model, const Matrix& inputs, const Vector& y, const SolveConfig& cfg = GpSolveSettings{}.solver);

struct LossWithGrad {
  double value = 0.0;
  /// d L / d (sigma, ell, lambda)
  Vector grad;
  Vector z_star;
};

/// L = ||Phi z* - y||^2 + lambda^2 ||z*|| (or ||z*||^2), differentiated through the solve.
LossWithGrad loss_pred(const RffModel& model, const Matrix& inputs, const Vector& y,
                       const GpSolveSettings& settings = {});

/// Thrown when the k x k Woodbury system is not numerically positive definite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// -log N(y | 0, Phi Phi^T + lambda^2 I) through the k x k Woodbury route.
double loss_lml(const RffModel& model, const Matrix& inputs, const Vector& y);

/// Same quantity by dense m x m Cholesky. Test scale only.
double loss_lml_dense(const RffModel& model, const Matrix& inputs, const Vector& y);

enum class CalibrationMethod { LML, PRED };
std::string to_string(CalibrationMethod method);
CalibrationMethod parse_method(const std::string& name);

struct CalibrationSettings {
  int steps = 300;
  double lr = 1e-2;
  Index features = 200;
  // Unit starting values, the usual library default; neither loss gets a tuned start.
  double init_sigma = 1.0;
  double init_ell = 1.0;
  double init_lambda = 1.0;
  /// Log-space step for the central-difference LML gradient.
  double fd_step = 1e-5;
  GpSolveSettings pred;

  void validate() const;
};

struct CalibrationResult {
  CalibrationMethod method = CalibrationMethod::PRED;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double ell = 0.0;
  double lambda = 0.0;
  std::vector<double> loss_trace;
  double test_rmse = 0.0;
  double wall_ms = 0.0;
  /// The calibrated model with z_star fitted on the training set.
  RffModel model;
};

/// Non-finite loss during calibration; carries the trace up to that point.
class CalibrationDiverged : public std::runtime_error {
 public:
  CalibrationDiverged(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Adam on (log sigma, log ell, log lambda); feature randomness is drawn from seed.
CalibrationResult calibrate(CalibrationMethod method, const SyntheticDataset& data, const CalibrationSettings& settings,
                            std::uint64_t seed);

/// Root-mean-square of Phi(x) z - y.
double predictive_rmse(const RffModel& model, const Vector& z, const Matrix& inputs, const Vector& y);

}  // namespace difflsq
