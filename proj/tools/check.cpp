#include "commands.hpp"
#include "difflsq/checks.hpp"
#include "manifest.hpp"

#include <cstdio>
#include <iostream>

namespace difflsq::cli {

int run_check(const CommonOptions& common, const CheckCommandOptions& opt) {
  if (common.precision != "double") throw UsageError("check runs in double precision only");
  const ResolvedSeed seed = resolve_seed(common);
  RunManifest manifest("check", seed.value, seed.source);
  manifest.set_flags({{"filter", opt.filter}, {"out", common.out}});
  if (opt.inject_adjoint_fault) manifest.add_note("inject_adjoint_fault", true);

  CheckOptions options;
  options.seed = seed.value;
  options.filter = opt.filter;
  options.inject_adjoint_fault = opt.inject_adjoint_fault;
  const auto outcomes = run_checks(options);
  if (outcomes.empty()) {
    std::string known;
    for (const auto& n : check_names()) known += " " + n;
    throw UsageError("--filter '" + opt.filter + "' selects no checks; known:" + known);
  }

  std::vector<std::string> failing;
  std::printf("%-30s %-6s %10s  %s\n", "check", "result", "ms", "detail");
  for (const auto& o : outcomes) {
    std::printf("%-30s %-6s %10.1f  %s\n", o.full_name().c_str(), o.passed ? "PASS" : "FAIL", o.wall_ms,
                o.detail.c_str());
    if (!o.passed) failing.push_back(o.full_name());
  }
  std::printf("%zu/%zu checks passed\n", outcomes.size() - failing.size(), outcomes.size());
  for (const auto& f : failing) std::printf("failed: %s\n", f.c_str());
  std::fflush(stdout);

  if (!common.out.empty()) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& o : outcomes) {
      results.push_back({{"check", o.full_name()}, {"passed", o.passed}, {"detail", o.detail}, {"wall_ms", o.wall_ms}});
    }
    manifest.add_output(common.out);
    manifest.finish();
    write_output(common.out, nlohmann::json{{"manifest", manifest.to_json()}, {"results", results}}.dump(1) + "\n");
  }
  return failing.empty() ? kExitOk : kExitValidation;
}

}  // namespace difflsq::cli
