#pragma once

// Experiment drivers shared by the command-line tool and the acceptance run.

#include "difflsq/adjoint.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace difflsq {

/// 1 / eps for IEEE single precision, 2^23.
inline constexpr double kInverseSingleEpsilon = 8388608.0;

struct SolverBenchRow {
  std::string solver;
  Index m = 0;
  Index n = 0;
  double cond = 0.0;
  Precision precision = Precision::Double;
  Index iterations = 0;
  double rel_error = 0.0;
  double resid_norm = 0.0;
  double wall_ms = 0.0;
};

/**
 * LSMR and CGLS on make_illconditioned(m, n, cond) with b ~ N(0, I), compared
 * against the double-precision dense QR solution. Returns one row per solver.
 */
std::vector<SolverBenchRow> run_solver_bench(Index m, Index n, double cond, Precision precision, std::uint64_t seed,
                                             const SolveConfig& cfg);

/// Scalar objectives of x used by the gradient checks.
enum class Objective { HalfNorm, Linear, Shifted };
std::string to_string(Objective objective);

/// Relative errors of an analytic pullback against central finite differences.
struct GradientCheck {
  double params = 0.0;
  double b = 0.0;
  double lambda = 0.0;
  Index inner_solves = 0;

  double worst() const;
};

/**
 * Full-coordinate finite-difference check of the theta, b and lambda gradients
 * of objective(LstSq(op, b, lambda)) with b, w and x0 drawn from seed.
 */
GradientCheck check_gradients_fd(const OperatorPtr& op, double lambda, Objective objective, std::uint64_t seed,
                                 const SolveConfig& cfg);

/// A small well-conditioned parameterized operator of the given kind and mode.
OperatorPtr gradient_test_operator(OperatorKind kind, ProblemMode mode, std::uint64_t seed);

struct GradBenchRow {
  std::string case_name;
  ProblemMode mode = ProblemMode::Tall;
  Index m = 0;
  Index n = 0;
  Index p = 0;
  /// "theta", "b" or "lambda".
  std::string grad;
  double fd_rel_err = 0.0;
  Index inner_solves = 0;
  /// Best-of-repeats time of one pullback.
  double wall_ms = 0.0;
};

struct GradBenchSettings {
  std::vector<Index> sizes{256, 512, 1024, 2048, 4096};
  double lambda = 0.1;
  Index kernel_size = 5;
  int repeats = 5;
  SolveConfig solver{1e-13, 1e-13, 1e10, 2000, Precision::Double};
};

/**
 * Gradients through square circular convolutions (tall) and through the wide
 * adjoint of two stacked convolutions. Each size contributes three rows per
 * mode, checked by directional central differences.
 */
std::vector<GradBenchRow> run_grad_bench(const GradBenchSettings& settings, std::uint64_t seed);

/// Least-squares slope of log(wall_ms) against log(n) for one mode.
double wall_time_slope(const std::vector<GradBenchRow>& rows, ProblemMode mode);

double median(std::vector<double> values);

}  // namespace difflsq
