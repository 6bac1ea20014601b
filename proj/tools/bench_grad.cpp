#include "commands.hpp"
#include "difflsq/experiments.hpp"
#include "manifest.hpp"

#include <cstdio>
#include <sstream>

namespace difflsq::cli {

int run_bench_grad(const CommonOptions& common, const BenchGradOptions& opt) {
  if (common.precision != "double") {
    throw UsageError("bench-grad compares against finite differences and needs --precision double");
  }
  const ResolvedSeed seed = resolve_seed(common);
  RunManifest manifest("bench-grad", seed.value, seed.source);
  manifest.set_flags({{"sizes", opt.sizes},
                      {"lambda", opt.lambda},
                      {"kernel", opt.kernel},
                      {"repeats", opt.repeats},
                      {"precision", common.precision},
                      {"jobs", common.jobs},
                      {"out", common.out}});

  GradBenchSettings settings;
  settings.sizes.assign(opt.sizes.begin(), opt.sizes.end());
  settings.lambda = opt.lambda;
  settings.kernel_size = opt.kernel;
  settings.repeats = opt.repeats;
  for (const Index n : settings.sizes) {
    if (n < settings.kernel_size) throw UsageError("every --sizes entry must be at least --kernel");
  }

  // Sizes are independent; timings are only comparable when --jobs is 1.
  std::vector<std::vector<GradBenchRow>> per_size(settings.sizes.size());
  parallel_for(settings.sizes.size(), common.jobs, [&](std::size_t i) {
    GradBenchSettings one = settings;
    one.sizes = {settings.sizes[i]};
    per_size[i] = run_grad_bench(one, seed.value);
  });
  std::vector<GradBenchRow> rows;
  for (auto& part : per_size) rows.insert(rows.end(), part.begin(), part.end());

  std::ostringstream body;
  body << "case,mode,m,n,p,grad,fd_rel_err,inner_solves,wall_ms\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%s,%ld,%ld,%ld,%s,%.6e,%ld,%.3f\n", r.case_name.c_str(),
                  to_string(r.mode).c_str(), static_cast<long>(r.m), static_cast<long>(r.n), static_cast<long>(r.p),
                  r.grad.c_str(), r.fd_rel_err, static_cast<long>(r.inner_solves), r.wall_ms);
    body << line;
  }

  manifest.add_note("wall_time_slope_tall", wall_time_slope(rows, ProblemMode::Tall));
  manifest.add_note("wall_time_slope_wide", wall_time_slope(rows, ProblemMode::Wide));
  if (!common.out.empty()) manifest.add_output(common.out);
  manifest.finish();
  write_output(common.out, manifest.csv_comment() + "\n" + body.str());
  return kExitOk;
}

}  // namespace difflsq::cli
