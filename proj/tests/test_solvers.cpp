#include "difflsq/solvers.hpp"
#include "difflsq/testkit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace difflsq {
namespace {

SolveConfig tight() {
  SolveConfig cfg;
  cfg.atol = 1e-14;
  cfg.btol = 1e-14;
  cfg.conlim = 1e12;
  cfg.max_iter = 1000;
  return cfg;
}

Vector v3(double a, double b, double c) { return (Vector(3) << a, b, c).finished(); }

TEST(Lsmr, IdentityProblems) {
  const auto id = identity(3);
  EXPECT_TRUE(lsmr({id, v3(1, 2, 3), 0.0}).x.isApprox(v3(1, 2, 3), 1e-12));
  EXPECT_TRUE(lsmr({id, v3(1, 2, 3), 1.0}).x.isApprox(v3(0.5, 1, 1.5), 1e-12));
}

TEST(Lsmr, TallMeanAndWideMinNorm) {
  const auto col = make_dense((Matrix(2, 1) << 1, 1).finished());
  const auto rep = lsmr({col, (Vector(2) << 0, 2).finished(), 0.0});
  EXPECT_NEAR(rep.x[0], 1.0, 1e-12);

  const auto row = make_dense((Matrix(1, 2) << 1, 0).finished());
  const auto wide = lsmr({row, Vector::Constant(1, 2.0), 0.0});
  EXPECT_NEAR(wide.x[0], 2.0, 1e-12);
  EXPECT_NEAR(wide.x[1], 0.0, 1e-12);
}

TEST(Lsmr, ZeroRightHandSide) {
  const auto rep = lsmr({make_dense(gaussian_matrix(5, 3, 1)), Vector::Zero(5), 0.3});
  EXPECT_EQ(rep.iterations, 0);
  EXPECT_EQ(rep.stop_reason, StopReason::Converged);
  EXPECT_EQ(rep.x, Vector::Zero(3));
}

TEST(Lsmr, RejectsNonFiniteInput) {
  Vector b = Vector::Ones(4);
  b[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(lsmr({identity(4), b, 0.0}), ValidationError);
  EXPECT_THROW(lsmr({identity(4), Vector(Vector::Ones(4)), -1.0}), ValidationError);
  EXPECT_THROW(lsmr({identity(4), Vector(Vector::Ones(3)), 0.0}), ShapeError);
}

TEST(Lsmr, MatchesDenseOracleOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (double lam : {0.0, 0.1}) {
      const auto rp = random_problem(20, 8, 1e3, lam, seed);
      const Vector ref = dense_lstsq(rp.dense, rp.problem.b, lam);
      const auto rep = lsmr(rp.problem, tight());
      EXPECT_EQ(rep.stop_reason, StopReason::Converged);
      EXPECT_LE(relative_error(rep.x, ref), 1e-8) << "seed " << seed << " lambda " << lam;
    }
  }
}

TEST(Lsmr, WideRegularizedUsesPushThrough) {
  const auto rp = random_problem(6, 15, 50.0, 0.4, 3);
  const Matrix& a = rp.dense;
  const Matrix g = a * a.transpose() + 0.16 * Matrix::Identity(6, 6);
  const Vector ref = a.transpose() * g.llt().solve(rp.problem.b);
  EXPECT_LE(relative_error(lsmr(rp.problem, tight()).x, ref), 1e-9);
}

TEST(Lsmr, TallOptimalityAtConvergence) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double lam = seed % 2 == 0 ? 0.0 : 0.5;
    const auto rp = random_problem(40, 12, 100.0, lam, seed);
    SolveConfig cfg;
    const auto rep = lsmr(rp.problem, cfg);
    ASSERT_EQ(rep.stop_reason, StopReason::Converged);
    const Matrix& a = rp.dense;
    const Vector grad = a.transpose() * (a * rep.x - rp.problem.b) + lam * lam * rep.x;
    const double anorm = estimate_norm(*rp.problem.op);
    EXPECT_LE(grad.norm(), 10.0 * cfg.atol * (anorm * anorm + lam * lam) * rep.x.norm()) << seed;
  }
}

TEST(Lsmr, WideFeasibilityAndRowSpace) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rp = random_problem(10, 25, 30.0, 0.0, seed);
    SolveConfig cfg;
    const auto rep = lsmr(rp.problem, cfg);
    const Matrix& a = rp.dense;
    EXPECT_LE((a * rep.x - rp.problem.b).norm(), 10.0 * cfg.btol * rp.problem.b.norm()) << seed;
    const Vector projected = a.transpose() * (a * a.transpose()).llt().solve(a * rep.x);
    EXPECT_LE((rep.x - projected).norm(), 1e-10 * rep.x.norm()) << seed;
  }
}

TEST(Lsmr, NormalResidualEstimateIsMonotone) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rp = random_problem(60, 20, 1e3, 0.0, seed);
    const auto rep = lsmr(rp.problem, tight());
    const auto& h = rep.normal_resid_history;
    ASSERT_FALSE(h.empty());
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] * (1.0 + 1e-12)) << "iteration " << i;
  }
}

TEST(Lsmr, IterationCapIsReported) {
  const auto rp = random_problem(80, 30, 1e4, 0.0, 2);
  SolveConfig cfg = tight();
  cfg.max_iter = 3;
  const auto rep = lsmr(rp.problem, cfg);
  EXPECT_EQ(rep.iterations, 3);
  EXPECT_EQ(rep.stop_reason, StopReason::MaxIter);
  EXPECT_EQ(SolveConfig{}.iteration_cap(*rp.problem.op), 2 * 30 + 100);
}

TEST(Lsmr, SinglePrecisionIsCloseOnEasyProblems) {
  const auto rp = random_problem(50, 10, 5.0, 0.1, 4);
  SolveConfig cfg;
  cfg.precision = Precision::Single;
  const auto rep = lsmr(rp.problem, cfg);
  EXPECT_LE(relative_error(rep.x, dense_lstsq(rp.dense, rp.problem.b, 0.1)), 1e-4);
}

TEST(Lsmr, Deterministic) {
  const auto rp = random_problem(30, 9, 100.0, 0.2, 7);
  EXPECT_EQ(lsmr(rp.problem).x, lsmr(rp.problem).x);
}

TEST(Cgls, IdentityAndAgreementWithLsmr) {
  EXPECT_TRUE(cgls({identity(3), v3(1, 2, 3), 0.0}).x.isApprox(v3(1, 2, 3), 1e-12));
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto rp = random_problem(20, 8, 5.0, seed % 2 == 0 ? 0.0 : 0.1, seed);
    const Vector a = cgls(rp.problem, tight()).x;
    const Vector b = lsmr(rp.problem, tight()).x;
    EXPECT_LE(relative_error(a, b), 1e-8) << seed;
  }
}

TEST(Cgls, WideForm) {
  const auto rp = random_problem(7, 19, 5.0, 0.0, 1);
  EXPECT_LE(relative_error(cgls(rp.problem, tight()).x, dense_lstsq(rp.dense, rp.problem.b, 0.0)), 1e-9);
}

TEST(DenseLstsq, SmallExamples) {
  EXPECT_TRUE(dense_lstsq(Matrix::Identity(2, 2), Vector::Ones(2), 0.0).isApprox(Vector::Ones(2)));
  const Matrix a = (Matrix(3, 2) << 1, 0, 0, 1, 1, 1).finished();
  EXPECT_TRUE(dense_lstsq(a, v3(1, 1, 2), 0.0).isApprox(Vector::Ones(2), 1e-14));
}

TEST(DenseLstsq, AgreesWithExtendedPrecisionNormalEquations) {
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double lam = seed % 3 == 0 ? 0.0 : 0.2;
    const Matrix a = make_illconditioned(12, 5, 20.0, seed);
    const Vector b = gaussian_vector(12, seed + 3);
    const MatrixL al = a.cast<long double>();
    MatrixL g = al.transpose() * al;
    g.diagonal().array() += static_cast<long double>(lam * lam);
    const VectorL rhs = al.transpose() * b.cast<long double>();
    const Vector ref = g.ldlt().solve(rhs).cast<double>();
    EXPECT_LE(relative_error(dense_lstsq(a, b, lam), ref), 1e-12) << seed;
  }
}

TEST(DenseLstsq, RankDeficientIsRejected) {
  Matrix a = gaussian_matrix(6, 3, 1);
  a.col(2) = a.col(0) + a.col(1);
  EXPECT_THROW(dense_lstsq(a, Vector::Ones(6), 0.0), RankDeficient);
  // Regularization restores full column rank.
  EXPECT_NO_THROW(dense_lstsq(a, Vector::Ones(6), 0.5));
}

TEST(MakeIllconditioned, SingularValues) {
  const Matrix unit = make_illconditioned(20, 6, 1.0, 1);
  const Eigen::JacobiSVD<Matrix> s1(unit);
  EXPECT_LE((s1.singularValues().array() - 1.0).abs().maxCoeff(), 1e-12);

  const Matrix hard = make_illconditioned(2000, 50, 1e7, 2);
  const Eigen::JacobiSVD<Matrix> s2(hard);
  const double cond = s2.singularValues()(0) / s2.singularValues()(49);
  EXPECT_NEAR(cond / 1e7, 1.0, 0.01);
  EXPECT_EQ(make_illconditioned(30, 4, 10.0, 3), make_illconditioned(30, 4, 10.0, 3));
}

TEST(MakeIllconditioned, FactorsAreOrthonormal) {
  // With cond = 1 the matrix is Q1 Q2^T, so its columns are themselves orthonormal.
  const Matrix q = make_illconditioned(40, 10, 1.0, 9);
  EXPECT_LE((q.transpose() * q - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Precision, ParseAndPrint) {
  EXPECT_EQ(parse_precision("single"), Precision::Single);
  EXPECT_EQ(parse_precision("double"), Precision::Double);
  EXPECT_THROW(parse_precision("half"), ValidationError);
  EXPECT_EQ(to_string(StopReason::ConLimExceeded), "ConLimExceeded");
}

}  // namespace
}  // namespace difflsq
