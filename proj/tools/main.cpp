#include "CLI11.hpp"
#include "commands.hpp"
#include "difflsq/linop.hpp"
#include "manifest.hpp"

#include <cstdlib>
#include <iostream>

namespace difflsq::cli {

ResolvedSeed resolve_seed(const CommonOptions& common) {
  if (common.seed) return {*common.seed, "flag"};
  if (const char* env = std::getenv("DIFFLSQ_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return {v, "env"};
    } catch (const std::exception&) {
      throw UsageError(std::string("DIFFLSQ_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return {0, "default"};
}

}  // namespace difflsq::cli

namespace {

using namespace difflsq::cli;

void add_common(CLI::App* sub, CommonOptions& common, const std::string& out_help) {
  sub->add_option("--seed", common.seed, "Base seed (overrides DIFFLSQ_SEED)");
  sub->add_option("--out", common.out, out_help);
  sub->add_option("--jobs", common.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  sub->add_option("--precision", common.precision, "Vector arithmetic precision")
      ->check(CLI::IsMember({"single", "double", "both"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable least squares: solver, gradient, GP and null-space experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_stamp());

  CommonOptions common;

  BenchSolversOptions bs;
  auto* bench_solvers = app.add_subcommand("bench-solvers", "LSMR vs CGLS on ill-conditioned problems (CSV)");
  add_common(bench_solvers, common, "CSV output path (default stdout)");
  bench_solvers->add_option("--m", bs.m, "Row counts")->delimiter(',')->check(CLI::PositiveNumber);
  bench_solvers->add_option("--n", bs.n, "Column counts")->delimiter(',')->check(CLI::PositiveNumber);
  bench_solvers->add_option("--cond", bs.cond, "Condition numbers")->delimiter(',')->check(CLI::Range(1.0, 1e300));
  bench_solvers->add_option("--atol", bs.atol, "LSMR/CGLS atol")->check(CLI::NonNegativeNumber);
  bench_solvers->add_option("--btol", bs.btol, "LSMR/CGLS btol")->check(CLI::NonNegativeNumber);
  bench_solvers->add_option("--conlim", bs.conlim, "Condition-estimate limit");
  bench_solvers->add_option("--max-iter", bs.max_iter, "Iteration cap (0: 2 min(m, n) + 100)")
      ->check(CLI::NonNegativeNumber);

  BenchGradOptions bg;
  auto* bench_grad = app.add_subcommand("bench-grad", "Gradient accuracy and cost through convolution solves (CSV)");
  add_common(bench_grad, common, "CSV output path (default stdout)");
  bench_grad->add_option("--sizes", bg.sizes, "Signal lengths")->delimiter(',')->check(CLI::PositiveNumber);
  bench_grad->add_option("--lambda", bg.lambda, "Tikhonov weight")->check(CLI::NonNegativeNumber);
  bench_grad->add_option("--kernel", bg.kernel, "Convolution kernel length")->check(CLI::PositiveNumber);
  bench_grad->add_option("--repeats", bg.repeats, "Timed pullback repeats (best is kept)")->check(CLI::PositiveNumber);

  GpCalibrateOptions gp;
  auto* gp_calibrate = app.add_subcommand("gp-calibrate", "Calibrate RFF GP hyperparameters by LML and PRED (CSV)");
  add_common(gp_calibrate, common, "CSV output path (default stdout)");
  gp_calibrate->add_option("--method", gp.method, "Calibration loss")->check(CLI::IsMember({"lml", "pred", "both"}));
  gp_calibrate->add_option("--seeds", gp.seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);
  gp_calibrate->add_option("--steps", gp.steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
  gp_calibrate->add_option("--lr", gp.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  gp_calibrate->add_option("--features", gp.features, "Random Fourier features")->check(CLI::PositiveNumber);
  gp_calibrate->add_option("--penalty", gp.penalty, "PRED penalty on z")->check(CLI::IsMember({"norm", "squared"}));
  gp_calibrate->add_option("--plot-out", gp.plot_out, "JSON of (x, y, mean) test triples");

  NsmDemoOptions nd;
  auto* nsm_demo = app.add_subcommand("nsm-demo", "Null-space method toy problems (JSON)");
  add_common(nsm_demo, common, "JSON output path (default stdout)");
  nsm_demo->add_option("--case", nd.demo_case, "Toy problem")->check(CLI::IsMember({"sphere", "sparsity", "commutant"}));
  nsm_demo->add_option("--eta", nd.eta, "Loss learning rate")->check(CLI::PositiveNumber);
  nsm_demo->add_option("--gamma", nd.gamma, "Constraint rate")->check(CLI::PositiveNumber);
  nsm_demo->add_option("--steps", nd.steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
  nsm_demo->add_option("--rule", nd.rule, "Base update rule")->check(CLI::IsMember({"gd", "adam"}));

  CheckCommandOptions ck;
  auto* check = app.add_subcommand("check", "Run the invariant suites; exit 0 iff all pass");
  add_common(check, common, "Optional JSON report path");
  check->add_option("--filter", ck.filter, "Suite name or check-name prefix, e.g. gp or adjoint.fd");
  check->add_flag("--inject-adjoint-fault", ck.inject_adjoint_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*bench_solvers) return run_bench_solvers(common, bs);
    if (*bench_grad) return run_bench_grad(common, bg);
    if (*gp_calibrate) return run_gp_calibrate(common, gp);
    if (*nsm_demo) return run_nsm_demo(common, nd);
    if (*check) return run_check(common, ck);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
