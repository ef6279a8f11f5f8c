#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dsr {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Suites accepted by run_verify: thresholding, model, iht, graphs,
/// consensus, diht, cbdiht, subgrad, harness, quick (all of the former),
/// acceptance and all.
const std::vector<std::string>& suite_names();

/// Runs a suite. When `out_dir` is non-empty, verify.csv and the run CSVs
/// produced along the way are written there. Output is deterministic.
std::vector<CheckResult> run_verify(const std::string& suite, const std::string& out_dir = "");

/// Columns suite,check,passed,detail.
void write_verify_csv(const std::vector<CheckResult>& results, std::ostream& os);

struct Criterion {
  std::string id;
  std::string title;
  double time_limit_s = 0.0;  // 0: no limit
  bool informational = false;
  std::function<CheckResult(const std::string& scratch_dir)> run;
};

/// The acceptance criteria, in order.
const std::vector<Criterion>& acceptance_criteria();

}  // namespace dsr
