#include "difflsq/nullspace.hpp"
#include "difflsq/testkit.hpp"

#include <gtest/gtest.h>

namespace difflsq {
namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

// c(theta) = sin(M theta) + (theta . theta) q for a random M and q, so J depends on theta.
ConstraintSpec random_nonlinear_constraint(Index d, Index k, std::uint64_t seed) {
  const Matrix m = gaussian_matrix(k, d, seed);
  const Vector q = 0.1 * gaussian_vector(k, seed + 1);
  return dense_constraint(
      d, k, [m, q](const Vector& t) -> Vector { return (m * t).array().sin().matrix() + t.squaredNorm() * q; },
      [m, q](const Vector& t) -> Matrix {
        return (m * t).array().cos().matrix().asDiagonal() * m + 2.0 * q * t.transpose();
      });
}

Matrix jacobian_of(const ConstraintSpec& cs, const Vector& theta) {
  return constraint_jacobian(cs, theta)->to_dense();
}

TEST(NsmStep, TangentGradientOnTheSphere) {
  const Vector delta = nsm_step(v2(1, 0), v2(0, 1), sphere_constraint(2), {});
  EXPECT_NEAR(delta[0], 0.0, 1e-12);
  EXPECT_NEAR(delta[1], -0.1, 1e-12);
}

TEST(NsmStep, PureConstraintCorrection) {
  // c = 3 and J = (4, 0), so -gamma J^T (J J^T)^{-1} c = -0.5 * 3 / 4.
  const Vector delta = nsm_step(v2(2, 0), Vector::Zero(2), sphere_constraint(2), {});
  EXPECT_NEAR(delta[0], -0.375, 1e-12);
  EXPECT_NEAR(delta[1], 0.0, 1e-12);
}

TEST(NsmStep, FixedPoint) {
  const Vector delta = nsm_step(v2(0.6, 0.8), Vector::Zero(2), sphere_constraint(2), {});
  EXPECT_EQ(delta.norm(), 0.0);
}

TEST(NsmStep, RejectsBadConfiguration) {
  NullSpaceConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(nsm_step(v2(1, 0), v2(0, 1), sphere_constraint(2), cfg), ValidationError);
  const ConstraintSpec too_many = linear_constraint(Matrix::Identity(3, 2), Vector::Zero(3));
  EXPECT_THROW(nsm_step(v2(1, 0), v2(0, 1), too_many, {}), ValidationError);
}

TEST(NsmStep, MatchesExplicitFormOnDenseInstances) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index d = 4 + static_cast<Index>(seed % 13);
    const Index k = 1 + static_cast<Index>(seed % 4);
    const auto cs = random_nonlinear_constraint(d, k, seed);
    const Vector theta = gaussian_vector(d, seed + 2);
    const Vector grad = gaussian_vector(d, seed + 3);
    NullSpaceConfig cfg;
    const Vector delta = nsm_step(theta, grad, cs, cfg);

    const Matrix j = jacobian_of(cs, theta);
    const Vector c = cs.value(theta);
    const Vector ref = -cfg.eta * dense_nullspace_projector(j) * grad - cfg.gamma * dense_pinv_apply(j, c);
    EXPECT_LE((delta - ref).cwiseAbs().maxCoeff(), 1e-9) << "D " << d << " k " << k;
  }
}

TEST(NsmStep, LinearizedFeasibility) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cs = random_nonlinear_constraint(9, 3, seed);
    const Vector theta = gaussian_vector(9, seed + 5);
    NullSpaceConfig cfg;
    const Vector delta = nsm_step(theta, gaussian_vector(9, seed + 6), cs, cfg);
    const Matrix j = jacobian_of(cs, theta);
    const Vector c = cs.value(theta);
    const double tol = cfg.solver.atol;
    EXPECT_LE((j * delta + cfg.gamma * c).norm(), 10.0 * tol * (j.norm() * delta.norm() + cfg.gamma * c.norm()));
  }
}

TEST(NsmStep, OrthogonalDecomposition) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cs = random_nonlinear_constraint(8, 2, seed);
    const Vector theta = gaussian_vector(8, seed + 7);
    const Vector grad = gaussian_vector(8, seed + 8);
    NullSpaceConfig cfg;
    const Vector delta = nsm_step(theta, grad, cs, cfg);
    const Vector tangent = cfg.eta * project_tangent(theta, grad, cs, cfg.solver);
    const Vector normal = cfg.gamma * lsmr({constraint_jacobian(cs, theta), cs.value(theta), 0.0}, cfg.solver).x;
    EXPECT_LE((delta + tangent + normal).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + delta.norm()));
    EXPECT_LE(std::abs(tangent.dot(normal)), 1e-8 * tangent.norm() * normal.norm());
  }
}

TEST(ProjectTangent, RowSpaceAndKernel) {
  const auto cs = random_nonlinear_constraint(6, 2, 3);
  const Vector theta = gaussian_vector(6, 4);
  const Matrix j = jacobian_of(cs, theta);
  SolveConfig cfg = NullSpaceConfig{}.solver;

  const Vector row = j.transpose() * gaussian_vector(2, 5);
  EXPECT_LE(project_tangent(theta, row, cs, cfg).norm(), 1e-9 * row.norm());

  const Vector tangent = dense_nullspace_projector(j) * gaussian_vector(6, 6);
  EXPECT_LE((project_tangent(theta, tangent, cs, cfg) - tangent).norm(), 1e-9 * tangent.norm());
}

TEST(ProjectTangent, MatchesDenseProjector) {
  const auto cs = random_nonlinear_constraint(12, 3, 7);
  const Vector theta = gaussian_vector(12, 8);
  const Matrix j = jacobian_of(cs, theta);
  const Matrix p = dense_nullspace_projector(j);
  SolveConfig cfg = NullSpaceConfig{}.solver;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Vector v = gaussian_vector(12, 100 + s);
    const Vector out = project_tangent(theta, v, cs, cfg);
    EXPECT_LE((out - p * v).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((j * out).norm(), 10.0 * cfg.atol * j.norm() * v.norm());
  }
}

TEST(ConstraintJacobian, DotTestAndDirectionalDerivative) {
  const auto cs = random_nonlinear_constraint(7, 3, 11);
  const Vector theta = gaussian_vector(7, 12);
  EXPECT_LE(dot_test_relative(*constraint_jacobian(cs, theta), 3, 1), 1e-12);
  const Vector v = gaussian_vector(7, 13);
  const auto jv = cs.jvp(theta, v);
  for (Index i = 0; i < 3; ++i) {
    const Vector fd = fd_grad([&](const Vector& t) { return cs.value(t)[i]; }, theta);
    EXPECT_NEAR(jv[i], fd.dot(v), 1e-5 * (1.0 + std::abs(jv[i])));
  }
}

TEST(Kkt, SphereOptimum) {
  const Vector a = v2(1.2, 1.6);
  const Vector theta = a.normalized();
  const auto r = kkt_report(theta, 2.0 * (theta - a), sphere_constraint(2), NullSpaceConfig{}.solver);
  EXPECT_LE(r.primal_residual, 1e-8);
  EXPECT_LE(r.stationarity_residual, 1e-8);
  // grad L = J^T lambda with J = 2 theta^T, so lambda = (1 - ||a||) here.
  ASSERT_EQ(r.lagrange_estimate.size(), 1);
  EXPECT_NEAR(r.lagrange_estimate[0], 1.0 - a.norm(), 1e-8);
}

TEST(Kkt, TrivialAndInfeasible) {
  const auto zero = kkt_report(v2(0, 1), Vector::Zero(2), sphere_constraint(2), {});
  EXPECT_EQ(zero.primal_residual, 0.0);
  EXPECT_EQ(zero.stationarity_residual, 0.0);

  const auto cs = random_nonlinear_constraint(5, 2, 1);
  const Vector theta = gaussian_vector(5, 2);
  const auto r = kkt_report(theta, gaussian_vector(5, 3), cs, NullSpaceConfig{}.solver);
  EXPECT_DOUBLE_EQ(r.primal_residual, cs.value(theta).norm());
  EXPECT_GE(r.stationarity_residual, 0.0);
}

TEST(Weighted, IdentityWeightsAndShift) {
  const Matrix a = gaussian_matrix(2, 4, 1);
  const Vector b = gaussian_vector(2, 2);
  const auto plain = weighted_to_standard(Vector::Ones(4), Vector::Zero(4), make_dense(a), b);
  EXPECT_LE((plain.op->to_dense() - a).norm(), 1e-15);
  EXPECT_EQ(plain.b, b);
  const Vector z = gaussian_vector(4, 3);
  EXPECT_EQ(plain.recover(z), z);

  const Vector v = gaussian_vector(4, 4);
  const auto shifted = weighted_to_standard(Vector::Ones(4), v, make_dense(a), b);
  EXPECT_LE((shifted.b - (b - a * v)).norm(), 1e-14);
  EXPECT_LE((shifted.recover(z) - (z + v)).norm(), 1e-15);
}

TEST(Weighted, DoubledIdentityHandSolution) {
  const auto red = weighted_to_standard(Vector::Constant(2, 2.0), Vector::Zero(2),
                                        make_dense((Matrix(1, 2) << 1, 1).finished()), Vector::Constant(1, 2.0));
  const Vector z = lsmr({red.op, red.b, 0.0}, NullSpaceConfig{}.solver).x;
  EXPECT_LE((z - v2(2, 2)).norm(), 1e-10);
  EXPECT_LE((red.recover(z) - v2(1, 1)).norm(), 1e-10);
}

TEST(Weighted, RejectsNonPositiveWeights) {
  EXPECT_THROW(weighted_to_standard(v2(1, 0), Vector::Zero(2), identity(2), Vector::Zero(2)), ValidationError);
  EXPECT_THROW(weighted_to_standard(v2(1, -2), Vector::Zero(2), identity(2), Vector::Zero(2)), ValidationError);
}

TEST(Transform, EmptyConstraintIsIdentity) {
  const auto t = chain_transform(no_constraint(3), {});
  const Vector g = gaussian_vector(3, 1);
  EXPECT_EQ(t(gaussian_vector(3, 2), g), g);
}

TEST(Transform, TangentGradientOnFeasibleSphere) {
  const auto t = chain_transform(sphere_constraint(2), {});
  EXPECT_LE((t(v2(0.6, 0.8), v2(-0.8, 0.6)) - v2(-0.8, 0.6)).norm(), 1e-12);
}

TEST(Transform, SphereToyConvergesWithPlainGradientDescent) {
  const Vector a = v2(1.2, 1.6);
  NullSpaceConfig cfg;
  const auto cs = sphere_constraint(2);
  ConstrainedOptimizer opt(chain_transform(cs, cfg), std::make_unique<GradientDescent>(cfg.eta));
  Vector theta = v2(-0.3, 1.4);
  for (int step = 0; step < 500; ++step) theta = opt.update(theta, 2.0 * (theta - a));
  const auto r = kkt_report(theta, 2.0 * (theta - a), cs, cfg.solver);
  EXPECT_LE(r.primal_residual, 1e-6);
  EXPECT_LE(r.stationarity_residual, 1e-4);
  EXPECT_LE((theta - a.normalized()).norm(), 1e-6);
}

TEST(Transform, SphereToyConvergesWithAdam) {
  const Vector a = v2(1.2, 1.6);
  NullSpaceConfig cfg;
  cfg.eta = 0.05;
  const auto cs = sphere_constraint(2);
  ConstrainedOptimizer opt(chain_transform(cs, cfg), std::make_unique<Adam>(cfg.eta));
  Vector theta = v2(1.0, -0.2);
  for (int step = 0; step < 1500; ++step) theta = opt.update(theta, 2.0 * (theta - a));
  EXPECT_LE((theta - a.normalized()).norm(), 1e-3);
}

}  // namespace
}  // namespace difflsq
