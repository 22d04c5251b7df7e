#pragma once

// Named validation suites. Each returns one or more ExperimentReports whose
// checks carry their own thresholds.

#include <cstdint>
#include <string>
#include <vector>

#include "pmest/harness.hpp"

namespace pmest {

struct SuiteOptions {
  std::uint64_t seed = 20240611;
  /// Thread counts compared by the reproducibility suite.
  std::vector<int> thread_counts = {1, 4, 8};
};

/// fixed-point, sherman-morrison, moments, shrinkage-fidelity,
/// augmented-fidelity, det-equiv, guards, reproducibility, concentration
const std::vector<std::string>& suite_names();

/// Throws ConfigError for an unknown name.
std::vector<ExperimentReport> run_suite(const std::string& name, const SuiteOptions& options = {});

}  // namespace pmest
