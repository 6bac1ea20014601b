#include "difflsq/checks.hpp"

#include "difflsq/bidiag.hpp"
#include "difflsq/experiments.hpp"
#include "difflsq/gp.hpp"
#include "difflsq/nsm_demos.hpp"
#include "difflsq/testkit.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

namespace difflsq {

namespace {

// Accumulates the worst observed value of one metric against its bound.
class Bound {
 public:
  Bound(std::string metric, double limit) : metric_(std::move(metric)), limit_(limit) {}

  // NaN sticks: once seen it is the worst value and fails the bound.
  void observe(double value, const std::string& where) {
    if (std::isnan(worst_)) return;
    if (std::isnan(value) || value > worst_) {
      worst_ = value;
      where_ = where;
    }
  }
  bool ok() const { return worst_ <= limit_; }
  std::string describe() const {
    std::ostringstream os;
    os << metric_ << " worst " << worst_ << " (limit " << limit_ << ")";
    if (!where_.empty()) os << " at " << where_;
    return os.str();
  }

 private:
  std::string metric_;
  double limit_;
  double worst_ = 0.0;
  std::string where_;
};

struct Verdict {
  bool passed = false;
  std::string detail;
};

Verdict from_bounds(std::initializer_list<const Bound*> bounds) {
  Verdict v{true, ""};
  for (const Bound* b : bounds) {
    v.passed = v.passed && b->ok();
    if (!v.detail.empty()) v.detail += "; ";
    v.detail += b->describe();
  }
  return v;
}

SolveConfig tight() {
  SolveConfig cfg;
  cfg.atol = 1e-14;
  cfg.btol = 1e-14;
  cfg.conlim = 1e12;
  cfg.max_iter = 2000;
  return cfg;
}

std::vector<std::pair<std::string, OperatorPtr>> operator_zoo(std::uint64_t seed) {
  const Index m = 3 + static_cast<Index>(seed % 7);
  const Index n = 2 + static_cast<Index>((seed / 7) % 6);
  const Matrix a = gaussian_matrix(m, n, seed);
  std::vector<std::pair<std::string, OperatorPtr>> ops;
  ops.emplace_back("dense", make_dense(a, true));
  ops.emplace_back("diagonal", make_diagonal(gaussian_vector(n, seed + 1)));
  ops.emplace_back("convolution", make_convolution(gaussian_vector(std::min<Index>(3, n), seed + 2), n));
  ops.emplace_back("rff", rff_operator(make_rff_model(n, 1, 1.3, 0.4, 0.1, seed + 3), gaussian_matrix(m, 1, seed + 4)));
  ops.emplace_back("stacked", stacked({make_dense(a, true), make_diagonal(gaussian_vector(n, seed + 5))}));
  ops.emplace_back("adjointed", adjointed(make_dense(a, true)));
  ops.emplace_back("scaled", scaled(0.7, make_dense(a, true), true));
  ops.emplace_back("composed", composed(make_dense(a, true), make_diagonal(gaussian_vector(n, seed + 6))));
  return ops;
}

std::string at(const std::string& what, std::uint64_t seed) { return what + " seed " + std::to_string(seed); }

Verdict check_dot_test(const CheckOptions& opt) {
  Bound bound("relative dot-test discrepancy", 1e-10);
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (const auto& [name, op] : operator_zoo(opt.seed + s)) bound.observe(dot_test_relative(*op, 3, opt.seed + s), at(name, s));
  }
  if (opt.inject_adjoint_fault) {
    const auto faulty = make_faulty_adjoint(gaussian_matrix(6, 4, opt.seed));
    bound.observe(dot_test_relative(*faulty, 3, opt.seed), "injected faulty_adjoint operator");
  }
  return from_bounds({&bound});
}

Verdict check_param_grad(const CheckOptions& opt) {
  Bound bound("param_inner_grad vs finite differences", 1e-5);
  for (std::uint64_t s = 0; s < 5; ++s) {
    for (const auto& [name, op] : operator_zoo(opt.seed + s)) {
      const Vector u = gaussian_vector(op->rows(), opt.seed + s + 100);
      const Vector v = gaussian_vector(op->cols(), opt.seed + s + 200);
      const Vector fd = fd_grad([&](const Vector& t) { return u.dot(op->with_params(t)->apply_forward(v)); }, op->params());
      bound.observe(relative_error(op->param_inner_grad(u, v), fd), at(name, s));
    }
  }
  return from_bounds({&bound});
}

Verdict check_bidiag(const CheckOptions& opt) {
  Bound recurrence("||A V - U B||", 1e-10);
  Bound ortho("orthonormality defect", 1e-10);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix a = make_illconditioned(20, 8, 100.0, opt.seed + s);
    const auto f = gk_factor(*make_dense(a), gaussian_vector(20, opt.seed + s + 1), 8, true);
    recurrence.observe((a * f.V - f.U * f.B).cwiseAbs().maxCoeff(), at("20x8", s));
    const Index ku = f.U.cols();
    const Index kv = f.V.cols();
    ortho.observe((f.U.transpose() * f.U - Matrix::Identity(ku, ku)).cwiseAbs().maxCoeff(), at("U", s));
    ortho.observe((f.V.transpose() * f.V - Matrix::Identity(kv, kv)).cwiseAbs().maxCoeff(), at("V", s));
  }
  return from_bounds({&recurrence, &ortho});
}

Verdict check_solver_oracle(const CheckOptions& opt) {
  Bound bound("LSMR vs dense QR relative error", 1e-8);
  for (std::uint64_t s = 0; s < 6; ++s) {
    for (const double lam : {0.0, 0.1, 1.0}) {
      const bool wide = s % 2 == 1;
      const auto rp = random_problem(wide ? 12 : 40, wide ? 40 : 12, 1e3, lam, opt.seed + s);
      const Vector ref = dense_lstsq(rp.dense, rp.problem.b, lam);
      bound.observe(relative_error(lsmr(rp.problem, tight()).x, ref), at(wide ? "wide" : "tall", s));
    }
  }
  return from_bounds({&bound});
}

Verdict check_cgls_agreement(const CheckOptions& opt) {
  Bound bound("CGLS vs LSMR relative difference", 1e-8);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto rp = random_problem(30, 10, 10.0, 0.1, opt.seed + s);
    bound.observe(relative_error(cgls(rp.problem, tight()).x, lsmr(rp.problem, tight()).x), at("30x10", s));
  }
  return from_bounds({&bound});
}

Verdict check_adjoint_fd(const CheckOptions& opt, ProblemMode mode) {
  Bound fd("gradient vs finite differences", 1e-5);
  Bound solves("inner solves per pullback minus 2", 0.0);
  for (const OperatorKind kind :
       {OperatorKind::Dense, OperatorKind::Diagonal, OperatorKind::Convolution1D, OperatorKind::RffFeatures}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      for (const double lam : {0.0, 0.1, 1.0}) {
        const auto op = gradient_test_operator(kind, mode, opt.seed + s);
        const GradientCheck c = check_gradients_fd(op, lam, Objective::Shifted, opt.seed + s, tight());
        const std::string where = at(to_string(kind) + " lambda " + std::to_string(lam), s);
        fd.observe(c.worst(), where);
        solves.observe(std::abs(static_cast<double>(c.inner_solves - 2)), where);
      }
    }
  }
  return from_bounds({&fd, &solves});
}

Verdict check_adjoint_closed_form(const CheckOptions&) {
  const auto op = scaled(2.0, identity(2), true);
  const Vector b = (Vector(2) << 2, 4).finished();
  auto [report, pullback] = vjp_lstsq({op, b, 0.0}, tight());
  const GradientBundle g = pullback({report.x});
  Bound bound("|grad_theta - (-2.5)|", 1e-9);
  bound.observe(std::abs(g.grad_params[0] + 2.5), "A = 2 I, b = (2, 4)");
  return from_bounds({&bound});
}

ConstraintSpec nonlinear_constraint(Index d, Index k, std::uint64_t seed) {
  const Matrix m = gaussian_matrix(k, d, seed);
  const Vector q = 0.1 * gaussian_vector(k, seed + 1);
  return dense_constraint(
      d, k, [m, q](const Vector& t) -> Vector { return (m * t).array().sin().matrix() + t.squaredNorm() * q; },
      [m, q](const Vector& t) -> Matrix { return (m * t).array().cos().matrix().asDiagonal() * m + 2.0 * q * t.transpose(); });
}

Verdict check_nsm_explicit(const CheckOptions& opt) {
  Bound bound("nsm_step vs explicit projection form (max abs)", 1e-9);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Index d = 4 + static_cast<Index>(s % 13);
    const Index k = 1 + static_cast<Index>(s % 4);
    const auto cs = nonlinear_constraint(d, k, opt.seed + s);
    const Vector theta = gaussian_vector(d, opt.seed + s + 2);
    const Vector grad = gaussian_vector(d, opt.seed + s + 3);
    const NullSpaceConfig cfg;
    const Matrix j = constraint_jacobian(cs, theta)->to_dense();
    const Vector ref = -cfg.eta * dense_nullspace_projector(j) * grad - cfg.gamma * dense_pinv_apply(j, cs.value(theta));
    bound.observe((nsm_step(theta, grad, cs, cfg) - ref).cwiseAbs().maxCoeff(), at("D " + std::to_string(d), s));
  }
  return from_bounds({&bound});
}

Verdict check_projector(const CheckOptions& opt) {
  Bound agree("project_tangent vs dense projector (max abs)", 1e-8);
  Bound feas("||J P v|| / (||J|| ||v||)", 1e-8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto cs = nonlinear_constraint(12, 3, opt.seed + s);
    const Vector theta = gaussian_vector(12, opt.seed + s + 1);
    const Vector v = gaussian_vector(12, opt.seed + s + 2);
    const Matrix j = constraint_jacobian(cs, theta)->to_dense();
    const Vector out = project_tangent(theta, v, cs, NullSpaceConfig{}.solver);
    agree.observe((out - dense_nullspace_projector(j) * v).cwiseAbs().maxCoeff(), at("D 12 k 3", s));
    feas.observe((j * out).norm() / (j.norm() * v.norm()), at("D 12 k 3", s));
  }
  return from_bounds({&agree, &feas});
}

Verdict check_sphere(const CheckOptions& opt) {
  DemoSettings settings;
  settings.seed = opt.seed;
  const DemoReport r = run_sphere_demo(settings);
  Bound primal("final ||c||", 1e-6);
  Bound station("final stationarity", 1e-4);
  Bound oracle("distance to a/||a||", 1e-4);
  primal.observe(r.nsm.last().primal_residual, "sphere");
  station.observe(r.nsm.last().stationarity_residual, "sphere");
  oracle.observe(r.oracle_distance, "sphere");
  return from_bounds({&primal, &station, &oracle});
}

Verdict check_weighted(const CheckOptions& opt) {
  Bound bound("reduced vs direct weighted optimum", 1e-8);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Index d = 6;
    const Index k = 2;
    const Vector w = Vector::Ones(d) + gaussian_vector(d, opt.seed + s).cwiseAbs();
    const Vector v = gaussian_vector(d, opt.seed + s + 1);
    const Matrix a = gaussian_matrix(k, d, opt.seed + s + 2);
    const Vector b = gaussian_vector(k, opt.seed + s + 3);
    const auto red = weighted_to_standard(w, v, make_dense(a), b);
    const Vector x = red.recover(lsmr({red.op, red.b, 0.0}, tight()).x);
    // KKT system of min ||W x - v||^2 s.t. A x = b.
    Matrix kkt = Matrix::Zero(d + k, d + k);
    kkt.topLeftCorner(d, d) = 2.0 * w.cwiseAbs2().asDiagonal();
    kkt.topRightCorner(d, k) = a.transpose();
    kkt.bottomLeftCorner(k, d) = a;
    Vector rhs(d + k);
    rhs << 2.0 * w.cwiseProduct(v), b;
    const Vector ref = kkt.fullPivLu().solve(rhs).head(d);
    bound.observe(relative_error(x, ref), at("D 6 k 2", s));
  }
  return from_bounds({&bound});
}

Verdict check_rff_grad(const CheckOptions& opt) {
  Bound bound("RFF param_inner_grad vs finite differences", 1e-5);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto op = rff_operator(make_rff_model(8, 1, 1.2, 0.3, 0.1, opt.seed + s), gaussian_matrix(20, 1, opt.seed + s + 1));
    const Vector u = gaussian_vector(20, opt.seed + s + 2);
    const Vector v = gaussian_vector(8, opt.seed + s + 3);
    const Vector fd = fd_grad([&](const Vector& t) { return u.dot(op->with_params(t)->apply_forward(v)); }, op->params());
    bound.observe(relative_error(op->param_inner_grad(u, v), fd), at("20x8", s));
  }
  return from_bounds({&bound});
}

Verdict check_loss_pred(const CheckOptions& opt) {
  Bound bound("loss_pred gradient vs finite differences", 1e-4);
  const auto data = make_dataset(opt.seed, 1.0, 200, 10);
  GpSolveSettings settings;
  settings.solver = tight();
  for (std::uint64_t s = 0; s < 3; ++s) {
    const RffModel base = make_rff_model(40, 1, 1.0, 0.2, 0.3, opt.seed + s);
    const auto lg = loss_pred(base, data.x_train, data.y_train, settings);
    const Vector fd = fd_grad(
        [&](const Vector& q) {
          return loss_pred(base.with_log_params(q.array().log().matrix()), data.x_train, data.y_train, settings).value;
        },
        (Vector(3) << base.sigma, base.ell, base.lambda).finished());
    bound.observe(relative_error(lg.grad, fd), at("200 points k 40", s));
  }
  return from_bounds({&bound});
}

Verdict check_lml(const CheckOptions& opt) {
  Bound bound("Woodbury vs dense LML", 1e-8);
  for (const Index m : {16, 48}) {
    const auto data = make_dataset(opt.seed + static_cast<std::uint64_t>(m), 1.0, m, 5);
    const RffModel model = make_rff_model(m / 2, 1, 1.1, 0.3, 0.4, opt.seed);
    bound.observe(relative_error(loss_lml(model, data.x_train, data.y_train),
                                 loss_lml_dense(model, data.x_train, data.y_train)),
                  "m " + std::to_string(m));
  }
  return from_bounds({&bound});
}

Verdict check_fd_grad(const CheckOptions&) {
  Bound bound("fd_grad on sin", 1e-9);
  const Vector g = fd_grad([](const Vector& t) { return std::sin(t[0]); }, Vector::Constant(1, 0.3));
  bound.observe(std::abs(g[0] - std::cos(0.3)), "theta = 0.3");
  return from_bounds({&bound});
}

struct Registered {
  const char* suite;
  const char* name;
  std::function<Verdict(const CheckOptions&)> run;
};

const std::vector<Registered>& registry() {
  static const std::vector<Registered> checks = {
      {"linop", "dot_test", check_dot_test},
      {"linop", "param_grad_fd", check_param_grad},
      {"bidiag", "factor_recurrence", check_bidiag},
      {"solvers", "dense_oracle", check_solver_oracle},
      {"solvers", "cgls_agreement", check_cgls_agreement},
      {"adjoint", "fd_tall", [](const CheckOptions& o) { return check_adjoint_fd(o, ProblemMode::Tall); }},
      {"adjoint", "fd_wide", [](const CheckOptions& o) { return check_adjoint_fd(o, ProblemMode::Wide); }},
      {"adjoint", "closed_form", check_adjoint_closed_form},
      {"nullspace", "explicit_form", check_nsm_explicit},
      {"nullspace", "tangent_projector", check_projector},
      {"nullspace", "sphere_kkt", check_sphere},
      {"nullspace", "weighted_reduction", check_weighted},
      {"gp", "rff_param_grad", check_rff_grad},
      {"gp", "loss_pred_fd", check_loss_pred},
      {"gp", "lml_woodbury", check_lml},
      {"testkit", "fd_grad", check_fd_grad},
  };
  return checks;
}

bool selected(const Registered& r, const std::string& filter) {
  if (filter.empty()) return true;
  const std::string full = std::string(r.suite) + "." + r.name;
  return filter == r.suite || full.rfind(filter, 0) == 0;
}

}  // namespace

std::vector<std::string> check_names() {
  std::vector<std::string> names;
  for (const auto& r : registry()) names.push_back(std::string(r.suite) + "." + r.name);
  return names;
}

std::vector<CheckOutcome> run_checks(const CheckOptions& options) {
  std::vector<CheckOutcome> out;
  for (const auto& r : registry()) {
    if (!selected(r, options.filter)) continue;
    CheckOutcome o;
    o.suite = r.suite;
    o.name = r.name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Verdict v = r.run(options);
      o.passed = v.passed;
      o.detail = v.detail;
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    o.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace difflsq
