#include "difflsq/gp.hpp"

#include "difflsq/nullspace.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace difflsq {

void RffModel::validate() const {
  if (k < 1) throw ValidationError("rff model: k must be >= 1");
  if (omega.rows() != k) throw ShapeError("rff omega rows", k, omega.rows());
  if (phases.size() != k) throw ShapeError("rff phases", k, phases.size());
  if (!(sigma > 0.0) || !(ell > 0.0) || !(lambda > 0.0)) {
    throw ValidationError("rff model: sigma, ell and lambda must be positive");
  }
}

Vector RffModel::log_params() const {
  return (Vector(3) << std::log(sigma), std::log(ell), std::log(lambda)).finished();
}

RffModel RffModel::with_log_params(const Vector& log_params) const {
  if (log_params.size() != 3) throw ShapeError("log hyperparameters", 3, log_params.size());
  RffModel out = *this;
  out.sigma = std::exp(log_params[0]);
  out.ell = std::exp(log_params[1]);
  out.lambda = std::exp(log_params[2]);
  out.z_star.resize(0);
  return out;
}

RffModel make_rff_model(Index k, Index input_dim, double sigma, double ell, double lambda, std::uint64_t seed) {
  if (k < 1 || input_dim < 1) throw ValidationError("rff model: k and input dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  RffModel m;
  m.k = k;
  m.omega.resize(k, input_dim);
  for (Index i = 0; i < k; ++i) {
    for (Index d = 0; d < input_dim; ++d) m.omega(i, d) = normal(rng);
  }
  m.phases.resize(k);
  for (Index i = 0; i < k; ++i) m.phases[i] = phase(rng);
  m.sigma = sigma;
  m.ell = ell;
  m.lambda = lambda;
  m.validate();
  return m;
}

RffFeatures::RffFeatures(Matrix inputs, Matrix omega, Vector phases, double sigma, double ell)
    : LinearOperator(inputs.rows(), omega.rows(), (Vector(2) << sigma, ell).finished()),
      inputs_(std::move(inputs)),
      omega_(std::move(omega)),
      phases_(std::move(phases)) {
  if (omega_.cols() != inputs_.cols()) throw ShapeError("rff omega columns", inputs_.cols(), omega_.cols());
  if (phases_.size() != omega_.rows()) throw ShapeError("rff phases", omega_.rows(), phases_.size());
  if (!(ell > 0.0)) throw ValidationError("rff lengthscale must be positive");
  const Matrix proj = inputs_ * omega_.transpose();
  const Matrix angle = (proj / ell).rowwise() + phases_.transpose();
  cosines_ = angle.array().cos().matrix();
  dell_ = (angle.array().sin() * proj.array()).matrix();
}

OperatorPtr RffFeatures::with_params(const Vector& params) const {
  check_param_size(params);
  return std::make_shared<RffFeatures>(inputs_, omega_, phases_, params[0], params[1]);
}

void RffFeatures::forward(const Vector& v, Vector& out) const { out.noalias() = sigma() * (cosines_ * v); }

void RffFeatures::adjoint(const Vector& u, Vector& out) const {
  out.noalias() = sigma() * (cosines_.transpose() * u);
}

void RffFeatures::param_grad(const Vector& u, const Vector& v, Vector& out) const {
  out.resize(2);
  out[0] = u.dot(cosines_ * v);
  out[1] = sigma() / (ell() * ell()) * u.dot(dell_ * v);
}

std::shared_ptr<const RffFeatures> rff_operator(const RffModel& model, const Matrix& inputs) {
  model.validate();
  return std::make_shared<RffFeatures>(inputs, model.omega, model.phases, model.sigma, model.ell);
}

Matrix feature_matrix(const RffModel& model, const Matrix& inputs) {
  model.validate();
  if (model.omega.cols() != inputs.cols()) throw ShapeError("rff omega columns", inputs.cols(), model.omega.cols());
  const Matrix angle = ((inputs * model.omega.transpose()) / model.ell).rowwise() + model.phases.transpose();
  return model.sigma * angle.array().cos().matrix();
}

double f_true(double x) {
  return std::cos(2.0 * std::numbers::pi * x) + x * std::sin(5.0 * std::numbers::pi * x);
}

SyntheticDataset make_dataset(std::uint64_t seed, double noise_scale, Index n_train, Index n_test) {
  if (n_train < 1 || n_test < 1) throw ValidationError("dataset sizes must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  auto draw = [&](Index n, Matrix& x, Vector& y) {
    x.resize(n, 1);
    y.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double xi = unif(rng);
      x(i, 0) = xi;
      y[i] = f_true(xi) + noise_scale * (0.05 + 0.25 * xi) * normal(rng);
    }
  };
  SyntheticDataset data;
  draw(n_train, data.x_train, data.y_train);
  draw(n_test, data.x_test, data.y_test);
  std::ostringstream os;
  os << "gaussian, std(x) = " << noise_scale << " * (0.05 + 0.25 x)";
  data.noise_profile = os.str();
  return data;
}

Vector gp_fit(const RffModel& model, const Matrix& inputs, const Vector& y, const SolveConfig& cfg) {
  return solve_checked({rff_operator(model, inputs), y, model.lambda}, cfg, "gp_fit").x;
}

LossWithGrad loss_pred(const RffModel& model, const Matrix& inputs, const Vector& y, const GpSolveSettings& settings) {
  const auto phi = rff_operator(model, inputs);
  const double lam = model.lambda;
  VjpResult vjp = vjp_lstsq({phi, y, lam}, settings.solver);
  const Vector& z = vjp.report.x;
  const Vector resid = phi->apply_forward(z) - y;
  const double znorm = z.norm();

  LossWithGrad out;
  Vector grad_z = 2.0 * phi->apply_adjoint(resid);
  double direct_lambda = 0.0;
  if (settings.penalty == PredPenalty::Norm) {
    out.value = resid.squaredNorm() + lam * lam * znorm;
    if (znorm > 0.0) grad_z += lam * lam / znorm * z;
    direct_lambda = 2.0 * lam * znorm;
  } else {
    out.value = resid.squaredNorm() + lam * lam * znorm * znorm;
    grad_z += 2.0 * lam * lam * z;
    direct_lambda = 2.0 * lam * znorm * znorm;
  }

  const GradientBundle g = vjp.pullback({grad_z});
  out.grad.resize(3);
  out.grad.head(2) = g.grad_params + 2.0 * phi->param_inner_grad(resid, z);
  out.grad[2] = g.grad_lambda + direct_lambda;
  out.z_star = z;
  return out;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

}  // namespace

double loss_lml(const RffModel& model, const Matrix& inputs, const Vector& y) {
  const Matrix phi = feature_matrix(model, inputs);
  if (y.size() != phi.rows()) throw ShapeError("loss_lml(y)", phi.rows(), y.size());
  const double m = static_cast<double>(phi.rows());
  const double k = static_cast<double>(phi.cols());
  const double lam2 = model.lambda * model.lambda;

  Matrix gram = Matrix::Zero(phi.cols(), phi.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
  gram.diagonal().array() += lam2;
  const Eigen::LLT<Matrix, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "loss_lml: Phi^T Phi + lambda^2 I is not positive definite (lambda = " << model.lambda
       << ", largest diagonal = " << gram.diagonal().maxCoeff() << ")";
    throw NumericalError(os.str());
  }
  const Vector phity = phi.transpose() * y;
  const double quad = (y.squaredNorm() - phity.dot(llt.solve(phity))) / lam2;
  const double logdet = (m - k) * std::log(lam2) + 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (quad + logdet + m * kLog2Pi);
}

double loss_lml_dense(const RffModel& model, const Matrix& inputs, const Vector& y) {
  const Matrix phi = feature_matrix(model, inputs);
  Matrix cov = phi * phi.transpose();
  cov.diagonal().array() += model.lambda * model.lambda;
  const Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("loss_lml_dense: covariance is not positive definite");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (y.dot(llt.solve(y)) + logdet + static_cast<double>(y.size()) * kLog2Pi);
}

std::string to_string(CalibrationMethod method) { return method == CalibrationMethod::LML ? "lml" : "pred"; }

CalibrationMethod parse_method(const std::string& name) {
  if (name == "lml" || name == "LML") return CalibrationMethod::LML;
  if (name == "pred" || name == "PRED") return CalibrationMethod::PRED;
  throw ValidationError("unknown calibration method '" + name + "' (expected lml or pred)");
}

void CalibrationSettings::validate() const {
  if (steps < 0) throw ValidationError("calibration steps must be >= 0");
  if (!(lr > 0.0)) throw ValidationError("calibration learning rate must be positive");
  if (features < 1) throw ValidationError("feature count must be >= 1");
  if (!(init_sigma > 0.0) || !(init_ell > 0.0) || !(init_lambda > 0.0)) {
    throw ValidationError("initial hyperparameters must be positive");
  }
  if (!(fd_step > 0.0)) throw ValidationError("fd_step must be positive");
  pred.solver.validate();
}

double predictive_rmse(const RffModel& model, const Vector& z, const Matrix& inputs, const Vector& y) {
  const Vector mean = rff_operator(model, inputs)->apply_forward(z);
  return std::sqrt((mean - y).squaredNorm() / static_cast<double>(y.size()));
}

CalibrationResult calibrate(CalibrationMethod method, const SyntheticDataset& data, const CalibrationSettings& settings,
                            std::uint64_t seed) {
  settings.validate();
  const auto start = std::chrono::steady_clock::now();
  RffModel model = make_rff_model(settings.features, data.x_train.cols(), settings.init_sigma, settings.init_ell,
                                  settings.init_lambda, seed);
  Vector logp = model.log_params();
  Adam adam(settings.lr);
  CalibrationResult result;
  result.method = method;
  result.seed = seed;

  auto diverged = [&](int step) {
    std::ostringstream os;
    os << "calibrate(" << to_string(method) << ", seed " << seed << "): non-finite loss at step " << step;
    throw CalibrationDiverged(os.str(), result.loss_trace);
  };

  for (int step = 0; step < settings.steps; ++step) {
    const RffModel current = model.with_log_params(logp);
    double value = 0.0;
    Vector grad_log(3);
    if (method == CalibrationMethod::PRED) {
      const LossWithGrad lg = loss_pred(current, data.x_train, data.y_train, settings.pred);
      value = lg.value;
      // d/d log p = p d/dp
      grad_log = lg.grad.cwiseProduct((Vector(3) << current.sigma, current.ell, current.lambda).finished());
    } else {
      value = loss_lml(current, data.x_train, data.y_train);
      for (int i = 0; i < 3; ++i) {
        Vector up = logp;
        Vector down = logp;
        up[i] += settings.fd_step;
        down[i] -= settings.fd_step;
        grad_log[i] = (loss_lml(model.with_log_params(up), data.x_train, data.y_train) -
                       loss_lml(model.with_log_params(down), data.x_train, data.y_train)) /
                      (2.0 * settings.fd_step);
      }
    }
    result.loss_trace.push_back(value);
    if (!std::isfinite(value) || !grad_log.allFinite()) diverged(step);
    logp += adam.step(grad_log);
  }

  result.model = model.with_log_params(logp);
  result.model.z_star = gp_fit(result.model, data.x_train, data.y_train, settings.pred.solver);
  result.sigma = result.model.sigma;
  result.ell = result.model.ell;
  result.lambda = result.model.lambda;
  result.test_rmse = predictive_rmse(result.model, result.model.z_star, data.x_test, data.y_test);
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace difflsq
