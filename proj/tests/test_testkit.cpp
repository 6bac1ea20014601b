#include "difflsq/testkit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace difflsq {
namespace {

TEST(FdGrad, QuadraticAndTrig) {
  const Vector theta = (Vector(3) << 0.5, -1.0, 2.0).finished();
  const Vector g = fd_grad([](const Vector& t) { return t.squaredNorm() + std::sin(t[0]); }, theta);
  Vector expected = 2.0 * theta;
  expected[0] += std::cos(0.5);
  EXPECT_LE(relative_error(g, expected), 1e-9);
}

TEST(FdGrad, ReportsNonFiniteCoordinate) {
  const auto f = [](const Vector& t) { return t[1] > 1.0 ? std::numeric_limits<double>::infinity() : t[0]; };
  try {
    fd_grad(f, (Vector(2) << 0.0, 1.0).finished());
    FAIL() << "expected NonFiniteEvaluation";
  } catch (const NonFiniteEvaluation& e) {
    EXPECT_EQ(e.coordinate(), 1);
  }
  EXPECT_THROW(fd_grad(f, Vector::Zero(2), FdConfig{0.0}), ValidationError);
}

TEST(DensePinv, MinNormAndLeastSquares) {
  const Matrix wide = (Matrix(1, 2) << 1, 1).finished();
  EXPECT_TRUE(dense_pinv_apply(wide, Vector::Constant(1, 2.0)).isApprox(Vector::Ones(2)));
  const Matrix tall = (Matrix(2, 1) << 1, 1).finished();
  EXPECT_NEAR(dense_pinv_apply(tall, (Vector(2) << 0, 2).finished())[0], 1.0, 1e-14);
}

TEST(DenseProjector, IsAnOrthogonalProjectorOntoTheKernel) {
  const Matrix j = gaussian_matrix(3, 8, 4);
  const Matrix p = dense_nullspace_projector(j);
  EXPECT_LE((p * p - p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((j * p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(p.trace(), 5.0, 1e-12);
}

TEST(RandomProblem, DenseMirrorMatchesOperator) {
  const auto rp = random_problem(9, 4, 30.0, 0.2, 1);
  EXPECT_EQ(rp.problem.op->to_dense(), rp.dense);
  EXPECT_EQ(rp.problem.lambda, 0.2);
  EXPECT_EQ(rp.problem.b.size(), 9);
}

TEST(RelativeError, ZeroReference) {
  EXPECT_EQ(relative_error(Vector(Vector::Zero(2)), Vector(Vector::Zero(2))), 0.0);
  EXPECT_EQ(relative_error(3.0, 0.0), 3.0);
  EXPECT_NEAR(relative_error(1.1, 1.0), 0.1, 1e-15);
}

}  // namespace
}  // namespace difflsq
