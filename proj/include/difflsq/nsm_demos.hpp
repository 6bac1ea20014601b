#pragma once

// Desk-scale constrained-training toys driven by the null-space optimizer.

#include "difflsq/nullspace.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace difflsq {

struct DemoStep {
  int step = 0;
  double loss = 0.0;
  double primal_residual = 0.0;
  double stationarity_residual = 0.0;
};

struct DemoTrajectory {
  std::string method;
  std::vector<DemoStep> steps;
  Vector final_theta;

  const DemoStep& last() const { return steps.back(); }
};

struct DemoSettings {
  double eta = 0.1;
  double gamma = 0.5;
  int steps = 500;
  std::uint64_t seed = 0;
  /// Base rule behind the null-space transform: "gd" or "adam".
  std::string rule = "gd";
};

struct DemoReport {
  std::string case_name;
  DemoSettings settings;
  DemoTrajectory nsm;
  /// Unconstrained reference runs (sphere case only).
  std::vector<DemoTrajectory> baselines;
  /// Closed-form optimum where one exists (sphere, commutant); empty otherwise.
  Vector oracle;
  double oracle_distance = 0.0;
  /// Signed final constraint value for the sparsity case.
  double final_constraint = 0.0;
};

inline constexpr double kPenaltyWeight = 10.0;
inline constexpr double kSparsityTarget = 0.5;

/// min ||theta - a||^2 s.t. ||theta||^2 = 1 with a = (1.2, 1.6); plus SGD and penalty baselines.
DemoReport run_sphere_demo(const DemoSettings& settings);

/// 2-16-1 network with Bernoulli weight masks; mean keep-probability pinned to 0.5.
DemoReport run_sparsity_demo(const DemoSettings& settings);

/// f(x) = W x on R^2 constrained to commute with the 90-degree rotation.
DemoReport run_commutant_demo(const DemoSettings& settings);

DemoReport run_demo(const std::string& case_name, const DemoSettings& settings);

}  // namespace difflsq
