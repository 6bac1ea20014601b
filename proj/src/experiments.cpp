#include "difflsq/experiments.hpp"

#include "difflsq/gp.hpp"
#include "difflsq/testkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace difflsq {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Vector perturbed_ones(Index n, std::uint64_t seed) {
  return Vector::Ones(n) + 0.3 * gaussian_vector(n, seed).cwiseMax(-2.0).cwiseMin(2.0);
}

// Leading tap 2 with small others keeps the circulant spectrum away from zero.
Vector dominant_kernel(Index size, std::uint64_t seed) {
  Vector k = 0.3 * gaussian_vector(size, seed);
  k[0] = 2.0;
  return k;
}

struct ObjectiveFns {
  Vector w;
  Vector x0;
  Objective kind;

  double value(const Vector& x) const {
    switch (kind) {
      case Objective::HalfNorm: return 0.5 * x.squaredNorm();
      case Objective::Linear: return w.dot(x);
      case Objective::Shifted: return 0.5 * (x - x0).squaredNorm();
    }
    return 0.0;
  }
  Vector grad(const Vector& x) const {
    switch (kind) {
      case Objective::HalfNorm: return x;
      case Objective::Linear: return w;
      case Objective::Shifted: return x - x0;
    }
    return x;
  }
};

GradientBundle pullback_at(const LstSqProblem& p, const Vector& x, const Vector& grad_x, const SolveConfig& cfg) {
  return p.mode() == ProblemMode::Tall ? grad_tall(p, x, {grad_x}, cfg) : grad_wide(p, x, {grad_x}, cfg);
}

Vector solve(const OperatorPtr& op, const Vector& b, double lambda, const SolveConfig& cfg) {
  return solve_checked({op, b, lambda}, cfg, "finite-difference probe").x;
}

}  // namespace

std::vector<SolverBenchRow> run_solver_bench(Index m, Index n, double cond, Precision precision, std::uint64_t seed,
                                             const SolveConfig& cfg) {
  const Matrix a = make_illconditioned(m, n, cond, seed);
  const Vector b = gaussian_vector(m, seed + 7919);
  const Vector oracle = dense_lstsq(a, b, 0.0);
  const LstSqProblem problem{make_dense(a), b, 0.0};
  SolveConfig run_cfg = cfg;
  run_cfg.precision = precision;

  std::vector<SolverBenchRow> rows;
  for (const char* name : {"lsmr", "cgls"}) {
    const auto start = Clock::now();
    const SolveReport rep = std::string(name) == "lsmr" ? lsmr(problem, run_cfg) : cgls(problem, run_cfg);
    SolverBenchRow row;
    row.wall_ms = elapsed_ms(start);
    row.solver = name;
    row.m = m;
    row.n = n;
    row.cond = cond;
    row.precision = precision;
    row.iterations = rep.iterations;
    row.rel_error = relative_error(rep.x, oracle);
    row.resid_norm = (a * rep.x - b).norm();
    rows.push_back(row);
  }
  return rows;
}

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::HalfNorm: return "half_norm";
    case Objective::Linear: return "linear";
    case Objective::Shifted: return "shifted";
  }
  return "unknown";
}

double GradientCheck::worst() const { return std::max({params, b, lambda}); }

GradientCheck check_gradients_fd(const OperatorPtr& op, double lambda, Objective objective, std::uint64_t seed,
                                 const SolveConfig& cfg) {
  const Vector b = gaussian_vector(op->rows(), seed + 11);
  const ObjectiveFns mu{gaussian_vector(op->cols(), seed + 12), gaussian_vector(op->cols(), seed + 13), objective};
  const LstSqProblem problem{op, b, lambda};

  const Pullback pullback(problem, solve(op, b, lambda, cfg), cfg);
  const GradientBundle g = pullback({mu.grad(pullback.x())});

  GradientCheck out;
  out.inner_solves = pullback.solves_performed();
  if (op->num_params() > 0) {
    const Vector fd =
        fd_grad([&](const Vector& t) { return mu.value(solve(op->with_params(t), b, lambda, cfg)); }, op->params());
    out.params = relative_error(g.grad_params, fd);
  }
  out.b = relative_error(g.grad_b, fd_grad([&](const Vector& bb) { return mu.value(solve(op, bb, lambda, cfg)); }, b));
  // The problem sees lambda^2 only, so |lambda| is the even extension through 0.
  const double fd_lambda = fd_grad([&](const Vector& l) { return mu.value(solve(op, b, std::abs(l[0]), cfg)); },
                                   Vector::Constant(1, lambda))[0];
  out.lambda = lambda == 0.0 ? std::abs(g.grad_lambda) : relative_error(g.grad_lambda, fd_lambda);
  return out;
}

OperatorPtr gradient_test_operator(OperatorKind kind, ProblemMode mode, std::uint64_t seed) {
  const bool tall = mode == ProblemMode::Tall;
  const Index m = tall ? 7 : 4;
  const Index n = tall ? 4 : 7;
  const Matrix a = gaussian_matrix(m, n, seed);
  switch (kind) {
    case OperatorKind::Dense: return make_dense(a, true);
    case OperatorKind::Diagonal: {
      if (tall) return make_diagonal(perturbed_ones(n, seed + 1));
      return adjointed(stacked({make_diagonal(perturbed_ones(m, seed + 1)), make_diagonal(perturbed_ones(m, seed + 7))}));
    }
    case OperatorKind::Convolution1D: {
      if (tall) return make_convolution(dominant_kernel(3, seed + 2), 6);
      return adjointed(stacked({make_convolution(dominant_kernel(3, seed + 2), 5),
                                make_convolution(dominant_kernel(3, seed + 8), 5)}));
    }
    case OperatorKind::RffFeatures: {
      const RffModel rff = make_rff_model(tall ? 5 : 12, 1, 1.1, 0.4, 0.1, seed + 3);
      return rff_operator(rff, gaussian_matrix(tall ? 12 : 5, 1, seed + 4));
    }
    case OperatorKind::Stacked: {
      if (tall) return stacked({make_dense(a, true), make_diagonal(perturbed_ones(n, seed + 5))});
      return adjointed(stacked({make_dense(a.transpose(), true), make_diagonal(perturbed_ones(m, seed + 5))}));
    }
    case OperatorKind::Adjointed: return adjointed(make_dense(a.transpose(), true));
    case OperatorKind::Scaled: return scaled(0.7, make_dense(a), true);
    case OperatorKind::Composed: return composed(make_dense(a, true), make_diagonal(perturbed_ones(n, seed + 6)));
    case OperatorKind::ConstraintJacobian: break;
  }
  throw ValidationError("gradient_test_operator: no parameterized instance of kind " + to_string(kind));
}

std::vector<GradBenchRow> run_grad_bench(const GradBenchSettings& settings, std::uint64_t seed) {
  if (settings.sizes.empty()) throw ValidationError("bench-grad: no problem sizes");
  if (settings.repeats < 1) throw ValidationError("bench-grad: repeats must be >= 1");
  std::vector<GradBenchRow> rows;
  for (const Index n : settings.sizes) {
    if (n < settings.kernel_size) throw ValidationError("bench-grad: size smaller than the kernel");
    for (const ProblemMode mode : {ProblemMode::Tall, ProblemMode::Wide}) {
      const std::uint64_t s = seed + static_cast<std::uint64_t>(n);
      const OperatorPtr op =
          mode == ProblemMode::Tall
              ? make_convolution(dominant_kernel(settings.kernel_size, s), n)
              : adjointed(stacked({make_convolution(dominant_kernel(settings.kernel_size, s), n),
                                   make_convolution(dominant_kernel(settings.kernel_size, s + 1), n)}));
      const Vector b = gaussian_vector(op->rows(), s + 2);
      const ObjectiveFns mu{Vector(), gaussian_vector(op->cols(), s + 3), Objective::Shifted};
      const double lam = settings.lambda;
      const LstSqProblem problem{op, b, lam};
      const Vector x = solve(op, b, lam, settings.solver);
      const Vector grad_x = mu.grad(x);

      GradientBundle g;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < settings.repeats; ++r) {
        const auto start = Clock::now();
        g = pullback_at(problem, x, grad_x, settings.solver);
        best = std::min(best, elapsed_ms(start));
      }

      // Directional central differences along seeded unit directions.
      const auto directional = [&](const Vector& base, const Vector& dir, auto&& eval) {
        const double h = 1e-6 * (1.0 + base.norm() / std::sqrt(static_cast<double>(base.size())));
        return (eval(Vector(base + h * dir)) - eval(Vector(base - h * dir))) / (2.0 * h);
      };
      const Vector dtheta = gaussian_vector(op->num_params(), s + 4).normalized();
      const Vector db = gaussian_vector(b.size(), s + 5).normalized();
      const double fd_theta = directional(op->params(), dtheta, [&](const Vector& t) {
        return mu.value(solve(op->with_params(t), b, lam, settings.solver));
      });
      const double fd_b = directional(b, db, [&](const Vector& bb) { return mu.value(solve(op, bb, lam, settings.solver)); });
      const double fd_lam = directional(Vector::Constant(1, lam), Vector::Ones(1), [&](const Vector& l) {
        return mu.value(solve(op, b, std::abs(l[0]), settings.solver));
      });

      const auto push = [&](const char* which, double analytic, double fd) {
        GradBenchRow row;
        row.case_name = mode == ProblemMode::Tall ? "conv_square" : "conv_stacked_adjoint";
        row.mode = mode;
        row.m = op->rows();
        row.n = op->cols();
        row.p = op->num_params();
        row.grad = which;
        row.fd_rel_err = relative_error(analytic, fd);
        row.inner_solves = g.inner_solves;
        row.wall_ms = best;
        rows.push_back(row);
      };
      push("theta", g.grad_params.dot(dtheta), fd_theta);
      push("b", g.grad_b.dot(db), fd_b);
      push("lambda", g.grad_lambda, fd_lam);
    }
  }
  return rows;
}

double wall_time_slope(const std::vector<GradBenchRow>& rows, ProblemMode mode) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : rows) {
    if (r.mode != mode || r.grad != "theta") continue;
    xs.push_back(std::log(static_cast<double>(std::max(r.m, r.n))));
    ys.push_back(std::log(std::max(r.wall_ms, 1e-6)));
  }
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace difflsq
