#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "booster/harness/checks.hpp"
#include "booster/harness/gradient.hpp"

namespace booster::harness {

struct UnitOptions {
  GradCheckOptions grad;
  /// Additional gradient cases registered after the built-in primitives (test fixtures).
  std::vector<GradCase> extra_cases;
  /// Scratch space for parser round-trips; a temporary directory when empty.
  std::filesystem::path scratch;
};

/// Gradient checks, projection/budget invariants, injection geometry, parser round-trips.
CheckRegistry unit_property_registry(const UnitOptions& opts = {});
std::vector<CheckReport> run_unit_properties(const UnitOptions& opts = {}, const ReportSink& sink = {});

/// Only the gradient checks (primitives plus end-to-end input gradients).
CheckRegistry gradient_registry(const UnitOptions& opts = {});

}  // namespace booster::harness
