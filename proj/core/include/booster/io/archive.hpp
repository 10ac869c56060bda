#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "booster/injection/signal.hpp"
#include "booster/model/model.hpp"
#include "booster/tensor.hpp"

namespace booster {

/// Versioned named-tensor container. Layout (little-endian):
///   "BSTTNSR\0" | u32 version | u32 n_meta | {u32 len, key, u32 len, value}*
///   | u32 n_tensors | {u32 len, name, u32 rank, u64 dims[rank], f32 payload}*
///   | u64 FNV-1a of all preceding bytes
struct TensorArchive {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  [[nodiscard]] const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::uint32_t kSignalVersion = 1;

void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
/// FormatError on bad magic, unsupported version, or truncation; CorruptionError on hash mismatch.
TensorArchive load_archive(const std::filesystem::path& path);

/// Signal file: "BSTSIGN\0" | u32 version | u32 w, C, H, W | f32 frame | u64 FNV-1a.
void save_signal(const std::filesystem::path& path, const BoosterSignal& signal);
BoosterSignal load_signal(const std::filesystem::path& path);

/// Model parameters plus architecture metadata, so the file alone rebuilds the model.
TensorArchive model_archive(const Model& model);
Model model_from_archive(const TensorArchive& archive);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace booster
