#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace dppvfx {

struct SuiteOptions {
  bool quick = false;
  /// Fault injection: negate every log acceptance after the bound check.
  bool flip_accept_sign = false;
  std::vector<int> only;  ///< empty means every criterion
  std::ostream* log = nullptr;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string summary;
  double seconds = 0.0;
  nlohmann::json detail;  ///< statistics and thresholds
};

struct SuiteReport {
  std::vector<CriterionResult> results;
  bool quick = false;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Runs the fixed-seed acceptance criteria. Quick mode drops the scaling sweep.
SuiteReport run_acceptance_suite(const SuiteOptions& options = {});

/// One line per criterion: "[PASS] 1 dpp_exactness: ...".
void print_report(std::ostream& out, const SuiteReport& report);

}  // namespace dppvfx
