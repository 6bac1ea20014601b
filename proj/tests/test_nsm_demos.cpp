#include "difflsq/nsm_demos.hpp"

#include <gtest/gtest.h>

namespace difflsq {
namespace {

TEST(SphereDemo, ReachesClosedFormOptimum) {
  DemoSettings s;
  s.seed = 3;
  const auto r = run_sphere_demo(s);
  EXPECT_EQ(r.case_name, "sphere");
  ASSERT_EQ(r.nsm.steps.size(), 501u);  // the starting point plus one entry per step
  EXPECT_LE(r.nsm.last().primal_residual, 1e-6);
  EXPECT_LE(r.nsm.last().stationarity_residual, 1e-4);
  EXPECT_LE(r.oracle_distance, 1e-6);
  EXPECT_NEAR(r.oracle.norm(), 1.0, 1e-15);
}

TEST(SphereDemo, UnconstrainedBaselinesStayOffTheSphere) {
  const auto r = run_sphere_demo({});
  ASSERT_EQ(r.baselines.size(), 2u);
  // Plain gradient descent goes to a itself, where ||a||^2 - 1 = 3.
  EXPECT_NEAR(r.baselines[0].last().primal_residual, 3.0, 1e-3);
  EXPECT_GT(r.baselines[1].last().primal_residual, 1e-3);
  EXPECT_LT(r.baselines[1].last().primal_residual, 3.0);
}

TEST(SphereDemo, DeterministicPerSeed) {
  DemoSettings s;
  s.steps = 50;
  s.seed = 9;
  EXPECT_EQ(run_sphere_demo(s).nsm.final_theta, run_sphere_demo(s).nsm.final_theta);
  DemoSettings other = s;
  other.seed = 10;
  EXPECT_NE(run_sphere_demo(s).nsm.final_theta, run_sphere_demo(other).nsm.final_theta);
}

TEST(CommutantDemo, MatchesReynoldsAverage) {
  const auto r = run_commutant_demo({});
  ASSERT_EQ(r.oracle.size(), 4);
  EXPECT_LE(r.nsm.last().primal_residual, 1e-6);
  EXPECT_LE(r.oracle_distance, 1e-4);
}

TEST(SparsityDemo, HoldsExpectedDensityAtTarget) {
  DemoSettings s;
  s.steps = 300;
  const auto r = run_sparsity_demo(s);
  EXPECT_LE(std::abs(r.final_constraint), 1e-3);
  EXPECT_TRUE(r.oracle.size() == 0);
  EXPECT_LT(r.nsm.last().loss, r.nsm.steps.front().loss);
}

TEST(RunDemo, DispatchAndUnknownCase) {
  DemoSettings s;
  s.steps = 5;
  EXPECT_EQ(run_demo("commutant", s).case_name, "commutant");
  EXPECT_THROW(run_demo("torus", s), ValidationError);
}

}  // namespace
}  // namespace difflsq
