#include "commands.hpp"
#include "difflsq/nsm_demos.hpp"
#include "manifest.hpp"

namespace difflsq::cli {

namespace {

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json trajectory_json(const DemoTrajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"step", s.step},
                     {"loss", s.loss},
                     {"primal_residual", s.primal_residual},
                     {"stationarity_residual", s.stationarity_residual}});
  }
  return {{"method", t.method},
          {"final_primal_residual", t.steps.empty() ? 0.0 : t.last().primal_residual},
          {"final_theta", vector_json(t.final_theta)},
          {"steps", std::move(steps)}};
}

}  // namespace

int run_nsm_demo(const CommonOptions& common, const NsmDemoOptions& opt) {
  if (common.precision != "double") throw UsageError("nsm-demo runs in double precision only");
  const ResolvedSeed seed = resolve_seed(common);
  RunManifest manifest("nsm-demo", seed.value, seed.source);
  manifest.set_flags({{"case", opt.demo_case},
                      {"eta", opt.eta},
                      {"gamma", opt.gamma},
                      {"steps", opt.steps},
                      {"rule", opt.rule},
                      {"out", common.out}});

  DemoSettings settings;
  settings.eta = opt.eta;
  settings.gamma = opt.gamma;
  settings.steps = opt.steps;
  settings.seed = seed.value;
  settings.rule = opt.rule;
  const DemoReport report = run_demo(opt.demo_case, settings);

  nlohmann::json baselines = nlohmann::json::array();
  for (const auto& b : report.baselines) baselines.push_back(trajectory_json(b));
  nlohmann::json out{{"case", report.case_name},
                     {"nsm", trajectory_json(report.nsm)},
                     {"baselines", std::move(baselines)},
                     {"oracle", vector_json(report.oracle)},
                     {"oracle_distance", report.oracle_distance},
                     {"final_constraint", report.final_constraint}};

  if (!common.out.empty()) manifest.add_output(common.out);
  manifest.finish();
  out["manifest"] = manifest.to_json();
  write_output(common.out, out.dump(1) + "\n");
  return kExitOk;
}

}  // namespace difflsq::cli
