#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace difflsq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Bad flag values or combinations; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  std::string precision = "double";
};

struct ResolvedSeed {
  std::uint64_t value = 0;
  /// "flag", "env" or "default"
  std::string source;
};

/// --seed wins over DIFFLSQ_SEED, which wins over 0.
ResolvedSeed resolve_seed(const CommonOptions& common);

struct BenchSolversOptions {
  std::vector<long> m{10000};
  std::vector<long> n{50};
  std::vector<double> cond{1.0, 1e2, 1e4, 8388608.0};
  double atol = 1e-6;
  double btol = 1e-6;
  double conlim = 1e8;
  long max_iter = 0;
};

struct BenchGradOptions {
  std::vector<long> sizes{256, 512, 1024, 2048, 4096};
  double lambda = 0.1;
  long kernel = 5;
  int repeats = 5;
};

struct GpCalibrateOptions {
  std::string method = "both";
  int seeds = 10;
  int steps = 300;
  double lr = 1e-2;
  long features = 200;
  std::string penalty = "norm";
  std::string plot_out;
};

struct NsmDemoOptions {
  std::string demo_case = "sphere";
  double eta = 0.1;
  double gamma = 0.5;
  int steps = 500;
  std::string rule = "gd";
};

struct CheckCommandOptions {
  std::string filter;
  bool inject_adjoint_fault = false;
};

int run_bench_solvers(const CommonOptions& common, const BenchSolversOptions& opt);
int run_bench_grad(const CommonOptions& common, const BenchGradOptions& opt);
int run_gp_calibrate(const CommonOptions& common, const GpCalibrateOptions& opt);
int run_nsm_demo(const CommonOptions& common, const NsmDemoOptions& opt);
int run_check(const CommonOptions& common, const CheckCommandOptions& opt);

/// Runs task(i) for i in [0, count) on up to `jobs` threads; callers write results by index.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace difflsq::cli
