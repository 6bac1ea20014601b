#include "difflsq/adjoint.hpp"
#include "difflsq/gp.hpp"
#include "difflsq/testkit.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace difflsq {
namespace {

SolveConfig tight() {
  SolveConfig cfg;
  cfg.atol = 1e-14;
  cfg.btol = 1e-14;
  cfg.conlim = 1e12;
  cfg.max_iter = 2000;
  return cfg;
}

Vector solve_x(const OperatorPtr& op, const Vector& b, double lambda) { return lsmr({op, b, lambda}, tight()).x; }

GradientBundle pull(const OperatorPtr& op, const Vector& b, double lambda, const Vector& grad_x) {
  const LstSqProblem p{op, b, lambda};
  const Vector x = solve_x(op, b, lambda);
  return p.mode() == ProblemMode::Tall ? grad_tall(p, x, {grad_x}, tight()) : grad_wide(p, x, {grad_x}, tight());
}

TEST(GradTall, ScaledIdentityClosedForm) {
  const auto op = scaled(2.0, identity(2), true);
  const Vector b = (Vector(2) << 2, 4).finished();
  const Vector x = solve_x(op, b, 0.0);
  EXPECT_TRUE(x.isApprox((Vector(2) << 1, 2).finished(), 1e-12));
  const auto g = grad_tall({op, b, 0.0}, x, {x}, tight());
  EXPECT_TRUE(g.grad_b.isApprox((Vector(2) << 0.5, 1).finished(), 1e-10));
  ASSERT_EQ(g.grad_params.size(), 1);
  EXPECT_NEAR(g.grad_params[0], -2.5, 1e-10);
  EXPECT_NEAR(g.grad_lambda, 0.0, 1e-14);
  EXPECT_EQ(g.inner_solves, 2);
}

TEST(GradTall, ScalarLambdaClosedForm) {
  const auto op = scaled(1.0, identity(1), true);
  const Vector b = Vector::Ones(1);
  const Vector x = solve_x(op, b, 1.0);
  EXPECT_NEAR(x[0], 0.5, 1e-14);
  const auto g = grad_tall({op, b, 1.0}, x, {x}, tight());
  EXPECT_NEAR(g.grad_lambda, -0.25, 1e-12);
}

TEST(GradTall, ZeroCotangentGivesZeros) {
  const auto op = make_dense(gaussian_matrix(7, 3, 1), true);
  const auto g = pull(op, gaussian_vector(7, 2), 0.1, Vector::Zero(3));
  EXPECT_EQ(g.grad_b.norm(), 0.0);
  EXPECT_EQ(g.grad_params.norm(), 0.0);
  EXPECT_EQ(g.grad_lambda, 0.0);
}

TEST(GradWide, ScaledRowClosedForm) {
  const auto op = scaled(2.0, make_dense((Matrix(1, 2) << 1, 0).finished()), true);
  const Vector b = Vector::Ones(1);
  const Vector x = solve_x(op, b, 0.0);
  EXPECT_TRUE(x.isApprox((Vector(2) << 0.5, 0).finished(), 1e-12));
  const auto g = grad_wide({op, b, 0.0}, x, {x}, tight());
  EXPECT_NEAR(g.grad_b[0], 0.25, 1e-12);
  EXPECT_NEAR(g.grad_params[0], -0.125, 1e-12);
  EXPECT_EQ(g.inner_solves, 2);
}

TEST(GradWide, ZeroCotangentGivesZeros) {
  const auto op = make_dense(gaussian_matrix(3, 7, 1), true);
  const auto g = pull(op, gaussian_vector(3, 2), 0.3, Vector::Zero(7));
  EXPECT_EQ(g.grad_b.norm(), 0.0);
  EXPECT_EQ(g.grad_params.norm(), 0.0);
  EXPECT_EQ(g.grad_lambda, 0.0);
}

TEST(SignArbitration, FrozenSignsAgreeWithFiniteDifferences) {
  // mu = ||b||^2 / (2 theta^2) for A = theta I; the truth is -||b||^2 / theta^3.
  const double theta = 1.7;
  const Vector b = (Vector(3) << 1.0, -0.5, 2.0).finished();
  const auto mu = [&](const Vector& t) { return 0.5 * solve_x(scaled(t[0], identity(3), true), b, 0.3).squaredNorm(); };
  const auto g = pull(scaled(theta, identity(3), true), b, 0.3, solve_x(scaled(theta, identity(3), true), b, 0.3));
  const double fd = fd_grad(mu, Vector::Constant(1, theta))[0];
  ASSERT_LT(fd, 0.0);
  EXPECT_GT(g.grad_params[0] * fd, 0.0) << "kParamGradSign disagrees with finite differences";

  const auto mu_lam = [&](const Vector& l) { return 0.5 * solve_x(scaled(theta, identity(3), true), b, l[0]).squaredNorm(); };
  const double fd_lam = fd_grad(mu_lam, Vector::Constant(1, 0.3))[0];
  EXPECT_GT(g.grad_lambda * fd_lam, 0.0) << "kLambdaGradSign disagrees with finite differences";
}

Vector well_conditioned_diag(Index n, std::uint64_t seed) {
  return Vector::Ones(n) + 0.3 * gaussian_vector(n, seed).cwiseMax(-2.0).cwiseMin(2.0);
}

Vector dominant_kernel(std::uint64_t seed) {
  Vector k = 0.3 * gaussian_vector(3, seed);
  k[0] = 2.0;
  return k;
}

struct Case {
  std::string name;
  OperatorPtr op;
};

// Every parameterized kind at a tall (or square) shape.
std::vector<Case> tall_cases(std::uint64_t seed) {
  const Index m = 7;
  const Index n = 4;
  const Matrix a = gaussian_matrix(m, n, seed);
  std::vector<Case> out;
  out.push_back({"dense", make_dense(a, true)});
  out.push_back({"diagonal", make_diagonal(well_conditioned_diag(n, seed + 1))});
  out.push_back({"convolution", make_convolution(dominant_kernel(seed + 2), 6)});
  const RffModel rff = make_rff_model(5, 1, 1.1, 0.4, 0.1, seed + 3);
  out.push_back({"rff", rff_operator(rff, gaussian_matrix(12, 1, seed + 4))});
  out.push_back({"stacked", stacked({make_dense(a, true), make_diagonal(well_conditioned_diag(n, seed + 5))})});
  out.push_back({"adjointed", adjointed(make_dense(a.transpose(), true))});
  out.push_back({"scaled", scaled(0.7, make_dense(a), true)});
  out.push_back({"composed", composed(make_dense(a, true), make_diagonal(well_conditioned_diag(n, seed + 6)))});
  return out;
}

// Every parameterized kind at a wide shape.
std::vector<Case> wide_cases(std::uint64_t seed) {
  const Index m = 4;
  const Index n = 7;
  const Matrix a = gaussian_matrix(m, n, seed);
  std::vector<Case> out;
  out.push_back({"dense", make_dense(a, true)});
  out.push_back({"diagonal", adjointed(stacked({make_diagonal(well_conditioned_diag(m, seed + 1)),
                                                make_diagonal(well_conditioned_diag(m, seed + 7))}))});
  out.push_back({"convolution", adjointed(stacked({make_convolution(dominant_kernel(seed + 2), 5),
                                                   make_convolution(dominant_kernel(seed + 8), 5)}))});
  const RffModel rff = make_rff_model(12, 1, 1.1, 0.4, 0.1, seed + 3);
  out.push_back({"rff", rff_operator(rff, gaussian_matrix(5, 1, seed + 4))});
  out.push_back({"stacked", adjointed(stacked({make_dense(a.transpose(), true),
                                               make_diagonal(well_conditioned_diag(m, seed + 5))}))});
  out.push_back({"adjointed", adjointed(make_dense(a.transpose(), true))});
  out.push_back({"scaled", scaled(0.7, make_dense(a), true)});
  out.push_back({"composed", composed(make_dense(a, true), make_diagonal(well_conditioned_diag(n, seed + 6)))});
  return out;
}

enum class Objective { HalfNorm, Linear, Shifted };

struct FdErrors {
  double params = 0.0;
  double b = 0.0;
  double lambda = 0.0;
};

FdErrors fd_check(const OperatorPtr& op, double lambda, Objective obj, std::uint64_t seed) {
  const Vector b = gaussian_vector(op->rows(), seed + 11);
  const Vector w = gaussian_vector(op->cols(), seed + 12);
  const Vector x0 = gaussian_vector(op->cols(), seed + 13);
  const auto mu = [&](const Vector& x) {
    switch (obj) {
      case Objective::HalfNorm: return 0.5 * x.squaredNorm();
      case Objective::Linear: return w.dot(x);
      case Objective::Shifted: return 0.5 * (x - x0).squaredNorm();
    }
    return 0.0;
  };
  const auto dmu = [&](const Vector& x) -> Vector {
    switch (obj) {
      case Objective::HalfNorm: return x;
      case Objective::Linear: return w;
      case Objective::Shifted: return x - x0;
    }
    return x;
  };

  const auto g = pull(op, b, lambda, dmu(solve_x(op, b, lambda)));
  EXPECT_EQ(g.inner_solves, 2);

  const Vector fd_params = fd_grad([&](const Vector& t) { return mu(solve_x(op->with_params(t), b, lambda)); }, op->params());
  const Vector fd_b = fd_grad([&](const Vector& bb) { return mu(solve_x(op, bb, lambda)); }, b);
  // The problem only sees lambda^2, so |lambda| extends mu evenly and the difference at 0 is exactly zero.
  const double fd_lambda =
      fd_grad([&](const Vector& l) { return mu(solve_x(op, b, std::abs(l[0]))); }, Vector::Constant(1, lambda))[0];

  FdErrors e;
  e.params = relative_error(g.grad_params, fd_params);
  e.b = relative_error(g.grad_b, fd_b);
  e.lambda = lambda == 0.0 ? std::abs(g.grad_lambda) : relative_error(g.grad_lambda, fd_lambda);
  return e;
}

void sweep(bool wide) {
  constexpr double kTol = 1e-5;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cases = wide ? wide_cases(seed) : tall_cases(seed);
    for (const auto& c : cases) {
      ASSERT_EQ(LstSqProblem({c.op, Vector::Zero(c.op->rows()), 0.0}).mode(), wide ? ProblemMode::Wide : ProblemMode::Tall)
          << c.name;
      for (double lambda : {0.0, 0.1, 1.0}) {
        for (Objective obj : {Objective::HalfNorm, Objective::Linear, Objective::Shifted}) {
          const FdErrors e = fd_check(c.op, lambda, obj, seed);
          const auto where = [&] {
            return c.name + " seed " + std::to_string(seed) + " lambda " + std::to_string(lambda) + " objective " +
                   std::to_string(static_cast<int>(obj));
          };
          EXPECT_LE(e.params, kTol) << where();
          EXPECT_LE(e.b, kTol) << where();
          EXPECT_LE(e.lambda, kTol) << where();
          ++checked;
        }
      }
    }
  }
  EXPECT_EQ(checked, 20 * 8 * 3 * 3);
}

TEST(FdAgreement, TallEveryKind) { sweep(false); }
TEST(FdAgreement, WideEveryKind) { sweep(true); }

TEST(FdAgreement, Convolution64) {
  Vector k = 0.3 * gaussian_vector(5, 1);
  k[0] = 2.0;
  const auto op = make_convolution(k, 64);
  for (Objective obj : {Objective::HalfNorm, Objective::Linear}) {
    const FdErrors e = fd_check(op, 0.1, obj, 3);
    EXPECT_LE(e.params, 1e-5);
    EXPECT_LE(e.b, 1e-5);
    EXPECT_LE(e.lambda, 1e-5);
  }
}

TEST(FdAgreement, WideDense8x20) {
  const auto op = make_dense(gaussian_matrix(8, 20, 4), true);
  for (double lambda : {0.0, 0.3}) {
    const FdErrors e = fd_check(op, lambda, Objective::Shifted, 5);
    EXPECT_LE(e.params, 1e-5) << lambda;
    EXPECT_LE(e.b, 1e-5) << lambda;
    EXPECT_LE(e.lambda, 1e-5) << lambda;
  }
}

TEST(Consistency, TallAndWideAgreeOnSquareSystems) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RandomProblem rp = random_problem(6, 6, 10.0, 0.2, seed);
    const LstSqProblem p{make_dense(rp.dense, true), rp.problem.b, 0.2};
    const Vector x = solve_x(p.op, p.b, p.lambda);
    const Vector gx = gaussian_vector(6, seed + 1);
    const auto t = grad_tall(p, x, {gx}, tight());
    const auto w = grad_wide(p, x, {gx}, tight());
    EXPECT_LE(relative_error(t.grad_b, w.grad_b), 1e-9);
    EXPECT_LE(relative_error(t.grad_params, w.grad_params), 1e-9);
    EXPECT_LE(relative_error(t.grad_lambda, w.grad_lambda), 1e-9);
  }
}

TEST(Vjp, IdentityPullbackReturnsX) {
  const Vector b = gaussian_vector(5, 1);
  auto [report, pullback] = vjp_lstsq({identity(5), b, 0.0}, tight());
  EXPECT_LE(relative_error(pullback({report.x}).grad_b, report.x), 1e-12);
}

TEST(Vjp, PullbackIsLinearAndCountsSolves) {
  const RandomProblem rp = random_problem(12, 5, 20.0, 0.1, 3);
  const LstSqProblem p{make_dense(rp.dense, true), rp.problem.b, 0.1};
  auto [report, pullback] = vjp_lstsq(p, tight());
  const Vector c = gaussian_vector(5, 9);
  const auto g1 = pullback({c});
  const auto g2 = pullback({Vector(2.0 * c)});
  EXPECT_LE(relative_error(g2.grad_b, Vector(2.0 * g1.grad_b)), 1e-10);
  EXPECT_LE(relative_error(g2.grad_params, Vector(2.0 * g1.grad_params)), 1e-10);
  EXPECT_NEAR(g2.grad_lambda, 2.0 * g1.grad_lambda, 1e-10 * std::abs(g1.grad_lambda));
  EXPECT_EQ(pullback.solves_performed(), 4);
  pullback({c});
  EXPECT_EQ(pullback.solves_performed(), 6);
}

TEST(Vjp, LinearObjectiveMatchesFdInB) {
  const RandomProblem rp = random_problem(9, 4, 10.0, 0.5, 8);
  const Vector w = gaussian_vector(4, 2);
  auto [report, pullback] = vjp_lstsq(rp.problem, tight());
  const Vector fd = fd_grad([&](const Vector& bb) { return w.dot(solve_x(rp.problem.op, bb, 0.5)); }, rp.problem.b);
  EXPECT_LE(relative_error(pullback({w}).grad_b, fd), 1e-6);
}

TEST(Vjp, ConcurrentInvocationsAreIndependent) {
  const RandomProblem rp = random_problem(15, 6, 10.0, 0.1, 1);
  auto [report, pullback] = vjp_lstsq({make_dense(rp.dense, true), rp.problem.b, 0.1}, tight());
  const Vector c = gaussian_vector(6, 4);
  const auto ref = pullback({c});
  std::vector<GradientBundle> results(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < results.size(); ++i) {
    threads.emplace_back([&, i] { results[i] = pullback({c}); });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) EXPECT_EQ(r.grad_b, ref.grad_b);
  EXPECT_EQ(pullback.solves_performed(), 10);
}

TEST(Vjp, ForwardFailureRaisesBeforePullback) {
  const RandomProblem rp = random_problem(40, 20, 1e6, 0.0, 2);
  SolveConfig cfg = tight();
  cfg.max_iter = 2;
  try {
    vjp_lstsq(rp.problem, cfg);
    FAIL() << "expected SolveFailure";
  } catch (const SolveFailure& e) {
    EXPECT_EQ(e.reason(), StopReason::MaxIter);
  }
}

}  // namespace
}  // namespace difflsq
