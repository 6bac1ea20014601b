#include "difflsq/nsm_demos.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace difflsq {

namespace {

using LossGrad = std::function<std::pair<double, Vector>(const Vector&)>;

std::unique_ptr<UpdateRule> make_rule(const DemoSettings& s) {
  if (s.rule == "gd") return std::make_unique<GradientDescent>(s.eta);
  if (s.rule == "adam") return std::make_unique<Adam>(s.eta);
  throw ValidationError("unknown base rule '" + s.rule + "' (expected gd or adam)");
}

DemoStep record(int step, double loss, const Vector& theta, const Vector& grad, const ConstraintSpec& cs,
                const SolveConfig& cfg) {
  const KktReport kkt = kkt_report(theta, grad, cs, cfg);
  return {step, loss, kkt.primal_residual, kkt.stationarity_residual};
}

DemoTrajectory run_null_space(const std::string& name, Vector theta, const LossGrad& loss_grad,
                              const ConstraintSpec& cs, const DemoSettings& s) {
  NullSpaceConfig cfg;
  cfg.eta = s.eta;
  cfg.gamma = s.gamma;
  ConstrainedOptimizer opt(chain_transform(cs, cfg), make_rule(s));
  DemoTrajectory traj;
  traj.method = name;
  for (int step = 0; step <= s.steps; ++step) {
    const auto [loss, grad] = loss_grad(theta);
    traj.steps.push_back(record(step, loss, theta, grad, cs, cfg.solver));
    if (step == s.steps) break;
    theta = opt.update(theta, grad);
  }
  traj.final_theta = theta;
  return traj;
}

DemoTrajectory run_unconstrained(const std::string& name, Vector theta, const LossGrad& objective,
                                 const LossGrad& task_loss, const ConstraintSpec& cs, double lr, int steps) {
  const SolveConfig cfg = NullSpaceConfig{}.solver;
  DemoTrajectory traj;
  traj.method = name;
  for (int step = 0; step <= steps; ++step) {
    const auto [loss, grad] = task_loss(theta);
    traj.steps.push_back(record(step, loss, theta, grad, cs, cfg));
    if (step == steps) break;
    theta -= lr * objective(theta).second;
  }
  traj.final_theta = theta;
  return traj;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DemoReport run_sphere_demo(const DemoSettings& s) {
  const Vector a = (Vector(2) << 1.2, 1.6).finished();
  const ConstraintSpec cs = sphere_constraint(2);

  // Random direction, radius in [0.5, 1.5].
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> radius(0.5, 1.5);
  const double phi = angle(rng);
  const double r = radius(rng);
  const Vector theta0 = (Vector(2) << r * std::cos(phi), r * std::sin(phi)).finished();

  const LossGrad task = [a](const Vector& theta) {
    return std::make_pair((theta - a).squaredNorm(), Vector(2.0 * (theta - a)));
  };
  const LossGrad penalized = [a](const Vector& theta) {
    const double c = theta.squaredNorm() - 1.0;
    const double value = (theta - a).squaredNorm() + kPenaltyWeight * c * c;
    return std::make_pair(value, Vector(2.0 * (theta - a) + kPenaltyWeight * 4.0 * c * theta));
  };

  DemoReport report;
  report.case_name = "sphere";
  report.settings = s;
  report.nsm = run_null_space("null_space", theta0, task, cs, s);
  report.baselines.push_back(run_unconstrained("sgd", theta0, task, task, cs, s.eta, s.steps));
  // The penalty objective is stiff (curvature ~ 8 * weight); its step is capped for stability.
  report.baselines.push_back(
      run_unconstrained("penalty", theta0, penalized, task, cs, std::min(s.eta, 0.01), s.steps));
  report.oracle = a / a.norm();
  report.oracle_distance = (report.nsm.final_theta - report.oracle).norm();
  report.final_constraint = cs.value(report.nsm.final_theta)[0];
  return report;
}

namespace {

// Parameter layout of the masked 2-16-1 network.
struct MaskedNet {
  static constexpr Index kIn = 2;
  static constexpr Index kHidden = 16;
  static constexpr Index kW1 = 0;
  static constexpr Index kB1 = kW1 + kHidden * kIn;
  static constexpr Index kW2 = kB1 + kHidden;
  static constexpr Index kB2 = kW2 + kHidden;
  static constexpr Index kL1 = kB2 + 1;
  static constexpr Index kL2 = kL1 + kHidden * kIn;
  static constexpr Index kSize = kL2 + kHidden;
  static constexpr Index kMasked = kHidden * kIn + kHidden;
};

double sparsity_target_fn(double x1, double x2) {
  return std::sin(std::numbers::pi * x1) * std::cos(0.5 * std::numbers::pi * x2);
}

ConstraintSpec expected_density_constraint() {
  ConstraintSpec cs;
  cs.dim_theta = MaskedNet::kSize;
  cs.dim_constraint = 1;
  cs.value = [](const Vector& theta) -> Vector {
    const auto logits = theta.segment(MaskedNet::kL1, MaskedNet::kMasked);
    double mean = 0.0;
    for (Index i = 0; i < logits.size(); ++i) mean += sigmoid(logits[i]);
    return Vector::Constant(1, mean / static_cast<double>(logits.size()) - kSparsityTarget);
  };
  auto dsigma = [](const Vector& theta) {
    Vector g = Vector::Zero(MaskedNet::kSize);
    for (Index i = 0; i < MaskedNet::kMasked; ++i) {
      const double p = sigmoid(theta[MaskedNet::kL1 + i]);
      g[MaskedNet::kL1 + i] = p * (1.0 - p) / static_cast<double>(MaskedNet::kMasked);
    }
    return g;
  };
  cs.jvp = [dsigma](const Vector& theta, const Vector& v) -> Vector {
    return Vector::Constant(1, dsigma(theta).dot(v));
  };
  cs.tjvp = [dsigma](const Vector& theta, const Vector& u) -> Vector { return u[0] * dsigma(theta); };
  return cs;
}

}  // namespace

DemoReport run_sparsity_demo(const DemoSettings& s) {
  using N = MaskedNet;
  constexpr int kBatch = 32;
  const ConstraintSpec cs = expected_density_constraint();

  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  Vector theta = Vector::Zero(N::kSize);
  for (Index i = 0; i < N::kB1; ++i) theta[i] = normal(rng) / std::sqrt(2.0);
  for (Index i = N::kW2; i < N::kB2; ++i) theta[i] = normal(rng) / 4.0;
  for (Index i = N::kL1; i < N::kSize; ++i) theta[i] = 1.0 + 0.5 * normal(rng);

  // Minibatch loss and straight-through gradient; each call draws fresh data and masks.
  const LossGrad loss_grad = [&](const Vector& th) {
    Vector mask(N::kMasked);
    for (Index i = 0; i < N::kMasked; ++i) mask[i] = coin(rng) < sigmoid(th[N::kL1 + i]) ? 1.0 : 0.0;
    Vector grad = Vector::Zero(N::kSize);
    double loss = 0.0;
    for (int b = 0; b < kBatch; ++b) {
      const double x[2] = {unif(rng), unif(rng)};
      const double y = sparsity_target_fn(x[0], x[1]);
      double h[N::kHidden];
      double out = th[N::kB2];
      for (Index j = 0; j < N::kHidden; ++j) {
        double pre = th[N::kB1 + j];
        for (Index i = 0; i < N::kIn; ++i) pre += th[N::kW1 + j * N::kIn + i] * mask[j * N::kIn + i] * x[i];
        h[j] = std::tanh(pre);
        out += th[N::kW2 + j] * mask[N::kHidden * N::kIn + j] * h[j];
      }
      const double err = out - y;
      loss += err * err / kBatch;
      const double dout = 2.0 * err / kBatch;
      grad[N::kB2] += dout;
      for (Index j = 0; j < N::kHidden; ++j) {
        const Index m2 = N::kHidden * N::kIn + j;
        const double g_w2_eff = dout * h[j];
        grad[N::kW2 + j] += g_w2_eff * mask[m2];
        grad[N::kL1 + m2] += g_w2_eff * th[N::kW2 + j];
        const double dpre = dout * th[N::kW2 + j] * mask[m2] * (1.0 - h[j] * h[j]);
        grad[N::kB1 + j] += dpre;
        for (Index i = 0; i < N::kIn; ++i) {
          const Index m1 = j * N::kIn + i;
          const double g_w1_eff = dpre * x[i];
          grad[N::kW1 + m1] += g_w1_eff * mask[m1];
          grad[N::kL1 + m1] += g_w1_eff * th[N::kW1 + m1];
        }
      }
    }
    // Straight-through: d mask / d logit is replaced by the sigmoid derivative.
    for (Index i = 0; i < N::kMasked; ++i) {
      const double p = sigmoid(th[N::kL1 + i]);
      grad[N::kL1 + i] *= p * (1.0 - p);
    }
    return std::make_pair(loss, grad);
  };

  DemoReport report;
  report.case_name = "sparsity";
  report.settings = s;
  report.nsm = run_null_space("null_space", theta, loss_grad, cs, s);
  report.final_constraint = cs.value(report.nsm.final_theta)[0];
  return report;
}

namespace {

Matrix rotation90() { return (Matrix(2, 2) << 0.0, -1.0, 1.0, 0.0).finished(); }

Matrix as_matrix(const Vector& theta) { return (Matrix(2, 2) << theta[0], theta[1], theta[2], theta[3]).finished(); }
Vector as_theta(const Matrix& w) { return (Vector(4) << w(0, 0), w(0, 1), w(1, 0), w(1, 1)).finished(); }

}  // namespace

DemoReport run_commutant_demo(const DemoSettings& s) {
  const Matrix rot = rotation90();
  // Orbit-closed inputs: every base point together with its three rotations.
  constexpr Index kBase = 5;
  const Matrix base = gaussian_matrix(2, kBase, s.seed);
  Matrix x(2, 4 * kBase);
  Matrix r_pow = Matrix::Identity(2, 2);
  for (int i = 0; i < 4; ++i) {
    x.middleCols(i * kBase, kBase) = r_pow * base;
    r_pow = rot * r_pow;
  }
  const Matrix w_true = gaussian_matrix(2, 2, s.seed + 1);
  const Matrix y = w_true * x + 0.1 * gaussian_matrix(2, x.cols(), s.seed + 2);
  const double scale = 1.0 / static_cast<double>(x.cols());

  const LossGrad loss_grad = [=](const Vector& theta) {
    const Matrix resid = as_matrix(theta) * x - y;
    return std::make_pair(scale * resid.squaredNorm(), as_theta(2.0 * scale * resid * x.transpose()));
  };

  // WR - RW = [[b + c, d - a], [d - a, -(b + c)]]; its two distinct entries are independent.
  Matrix jac(2, 4);
  jac << 0.0, 1.0, 1.0, 0.0,  //
      -1.0, 0.0, 0.0, 1.0;
  const ConstraintSpec cs = linear_constraint(jac, Vector::Zero(2));

  // Unconstrained optimum, then the group average (1/4) sum R^{-i} W0 R^i.
  const Matrix w0 = y * x.transpose() * (x * x.transpose()).inverse();
  Matrix reynolds = Matrix::Zero(2, 2);
  r_pow = Matrix::Identity(2, 2);
  for (int i = 0; i < 4; ++i) {
    reynolds += r_pow.transpose() * w0 * r_pow;
    r_pow = rot * r_pow;
  }
  reynolds /= 4.0;

  DemoReport report;
  report.case_name = "commutant";
  report.settings = s;
  report.nsm = run_null_space("null_space", as_theta(gaussian_matrix(2, 2, s.seed + 3)), loss_grad, cs, s);
  report.oracle = as_theta(reynolds);
  report.oracle_distance = (report.nsm.final_theta - report.oracle).cwiseAbs().maxCoeff();
  report.final_constraint = cs.value(report.nsm.final_theta).norm();
  return report;
}

DemoReport run_demo(const std::string& case_name, const DemoSettings& settings) {
  if (case_name == "sphere") return run_sphere_demo(settings);
  if (case_name == "sparsity") return run_sparsity_demo(settings);
  if (case_name == "commutant") return run_commutant_demo(settings);
  throw ValidationError("unknown demo case '" + case_name + "' (expected sphere, sparsity or commutant)");
}

}  // namespace difflsq
