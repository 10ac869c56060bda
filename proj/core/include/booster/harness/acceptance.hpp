#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "booster/harness/checks.hpp"

namespace booster::harness {

enum class Profile { Quick, Full };

/// Experiment sizes behind each profile.
struct AcceptanceScale {
  std::size_t train_examples = 5000;
  std::size_t test_examples = 1000;
  std::size_t epochs = 10;
  std::size_t seeds = 3;
  std::size_t landscape_images = 50;
  std::size_t small_train = 1000;  // null-reduction, determinism and checkpoint runs
  std::size_t small_test = 200;
  std::size_t small_epochs = 2;
};

AcceptanceScale scale_for(Profile profile);

struct AcceptanceOptions {
  Profile profile = Profile::Full;
  std::filesystem::path data_dir;
  std::filesystem::path work_dir;  // checkpoints, comparison.csv, report.csv
  ReportSink sink;
};

/// Every acceptance criterion as one report row, in order. DataError when the dataset is missing.
std::vector<CheckReport> run_acceptance(const AcceptanceOptions& opts);

}  // namespace booster::harness
