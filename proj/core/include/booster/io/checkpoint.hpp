#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "booster/training/plan.hpp"
#include "booster/training/training.hpp"

namespace booster {

inline constexpr int kCheckpointVersion = 1;

/// root/epoch_NNN
std::filesystem::path epoch_dir(const std::filesystem::path& root, std::size_t epoch);

/// Writes dir/{model.ckpt, signal.sig, metrics.csv, state.json}. model.ckpt also carries
/// the optimizer and signal momentum buffers so training resumes bit-exactly.
void save_checkpoint(const TrainState& state, const TrainPlan& plan, const std::filesystem::path& dir);

struct Checkpoint {
  TrainState state;
  TrainPlan plan;
};

/// FormatError on a version mismatch or malformed state; CorruptionError on a hash
/// mismatch or a missing file.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Highest epoch_NNN under root, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& root);

}  // namespace booster
