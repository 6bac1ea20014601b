#pragma once

// Invariant suites run by `difflsq check`.

#include <cstdint>
#include <string>
#include <vector>

namespace difflsq {

struct CheckOptions {
  std::uint64_t seed = 0;
  /// A suite name or a prefix of "<suite>.<name>"; empty runs everything.
  std::string filter;
  /// Adds an operator with a broken adjoint to the dot-test suite.
  bool inject_adjoint_fault = false;
};

struct CheckOutcome {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
  double wall_ms = 0.0;

  std::string full_name() const { return suite + "." + name; }
};

/// "<suite>.<name>" of every registered check, in run order.
std::vector<std::string> check_names();

/// Runs the selected checks. Exceptions inside a check count as failures.
std::vector<CheckOutcome> run_checks(const CheckOptions& options);

}  // namespace difflsq
