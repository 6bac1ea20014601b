#include "commands.hpp"
#include "difflsq/gp.hpp"
#include "manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace difflsq::cli {

namespace {

std::string default_plot_path(const std::string& csv_path) {
  if (csv_path.empty() || csv_path == "-") return "";
  std::filesystem::path p(csv_path);
  p.replace_extension(".plot.json");
  return p.string();
}

}  // namespace

int run_gp_calibrate(const CommonOptions& common, const GpCalibrateOptions& opt) {
  const ResolvedSeed seed = resolve_seed(common);
  RunManifest manifest("gp-calibrate", seed.value, seed.source);
  manifest.set_flags({{"method", opt.method},
                      {"seeds", opt.seeds},
                      {"steps", opt.steps},
                      {"lr", opt.lr},
                      {"features", opt.features},
                      {"penalty", opt.penalty},
                      {"precision", common.precision},
                      {"jobs", common.jobs},
                      {"out", common.out},
                      {"plot_out", opt.plot_out}});
  if (common.precision == "both") throw UsageError("gp-calibrate takes --precision single or double");

  CalibrationSettings settings;
  settings.steps = opt.steps;
  settings.lr = opt.lr;
  settings.features = opt.features;
  settings.pred.penalty = opt.penalty == "squared" ? PredPenalty::SquaredNorm : PredPenalty::Norm;
  settings.pred.solver.precision = parse_precision(common.precision);

  std::vector<CalibrationMethod> methods;
  if (opt.method == "both" || opt.method == "lml") methods.push_back(CalibrationMethod::LML);
  if (opt.method == "both" || opt.method == "pred") methods.push_back(CalibrationMethod::PRED);

  struct Task {
    CalibrationMethod method;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int i = 0; i < opt.seeds; ++i) {
    for (const auto m : methods) tasks.push_back({m, seed.value + static_cast<std::uint64_t>(i)});
  }

  std::vector<CalibrationResult> results(tasks.size());
  std::vector<SyntheticDataset> datasets(tasks.size());
  parallel_for(tasks.size(), common.jobs, [&](std::size_t i) {
    datasets[i] = make_dataset(tasks[i].seed);
    results[i] = calibrate(tasks[i].method, datasets[i], settings, tasks[i].seed);
  });

  std::ostringstream body;
  body << "method,seed,sigma,ell,lambda,test_rmse,wall_ms\n";
  char line[256];
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::snprintf(line, sizeof line, "%s,%llu,%.8g,%.8g,%.8g,%.8g,%.3f\n", to_string(r.method).c_str(),
                  static_cast<unsigned long long>(r.seed), r.sigma, r.ell, r.lambda, r.test_rmse, r.wall_ms);
    body << line;

    const auto& d = datasets[i];
    const Vector mean = feature_matrix(r.model, d.x_test) * r.model.z_star;
    nlohmann::json points = nlohmann::json::array();
    for (Index j = 0; j < d.x_test.rows(); ++j) points.push_back({d.x_test(j, 0), d.y_test[j], mean[j]});
    series.push_back({{"method", to_string(r.method)},
                      {"seed", r.seed},
                      {"loss_trace", r.loss_trace},
                      {"noise_profile", d.noise_profile},
                      {"points", std::move(points)}});
  }

  const std::string plot_path = opt.plot_out.empty() ? default_plot_path(common.out) : opt.plot_out;
  if (!common.out.empty()) manifest.add_output(common.out);
  if (!plot_path.empty()) manifest.add_output(plot_path);
  manifest.finish();
  write_output(common.out, manifest.csv_comment() + "\n" + body.str());
  if (!plot_path.empty()) {
    nlohmann::json plot{{"manifest", manifest.to_json()}, {"columns", {"x", "y", "mean"}}, {"series", series}};
    write_output(plot_path, plot.dump(1) + "\n");
  }
  return kExitOk;
}

}  // namespace difflsq::cli
