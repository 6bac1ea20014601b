#include "commands.hpp"
#include "difflsq/experiments.hpp"
#include "manifest.hpp"

#include <cstdio>
#include <sstream>

namespace difflsq::cli {

namespace {

std::vector<Precision> precisions(const std::string& flag) {
  if (flag == "both") return {Precision::Single, Precision::Double};
  return {parse_precision(flag)};
}

struct Cell {
  Index m;
  Index n;
  double cond;
  Precision precision;
};

}  // namespace

int run_bench_solvers(const CommonOptions& common, const BenchSolversOptions& opt) {
  const ResolvedSeed seed = resolve_seed(common);
  RunManifest manifest("bench-solvers", seed.value, seed.source);
  manifest.set_flags({{"m", opt.m},
                      {"n", opt.n},
                      {"cond", opt.cond},
                      {"precision", common.precision},
                      {"atol", opt.atol},
                      {"btol", opt.btol},
                      {"conlim", opt.conlim},
                      {"max_iter", opt.max_iter},
                      {"jobs", common.jobs},
                      {"out", common.out}});

  SolveConfig cfg;
  cfg.atol = opt.atol;
  cfg.btol = opt.btol;
  cfg.conlim = opt.conlim;
  cfg.max_iter = opt.max_iter;
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }

  std::vector<Cell> cells;
  for (const long m : opt.m) {
    for (const long n : opt.n) {
      for (const double cond : opt.cond) {
        for (const Precision p : precisions(common.precision)) cells.push_back({m, n, cond, p});
      }
    }
  }

  std::vector<std::vector<SolverBenchRow>> results(cells.size());
  parallel_for(cells.size(), common.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    results[i] = run_solver_bench(c.m, c.n, c.cond, c.precision, seed.value, cfg);
  });

  std::ostringstream body;
  body << "solver,m,n,cond,precision,iterations,rel_error,resid_norm,wall_ms\n";
  char line[256];
  for (const auto& rows : results) {
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%s,%ld,%ld,%.6g,%s,%ld,%.6e,%.6e,%.3f\n", r.solver.c_str(),
                    static_cast<long>(r.m), static_cast<long>(r.n), r.cond, to_string(r.precision).c_str(),
                    static_cast<long>(r.iterations), r.rel_error, r.resid_norm, r.wall_ms);
      body << line;
    }
  }

  if (!common.out.empty()) manifest.add_output(common.out);
  manifest.finish();
  write_output(common.out, manifest.csv_comment() + "\n" + body.str());
  return kExitOk;
}

}  // namespace difflsq::cli
