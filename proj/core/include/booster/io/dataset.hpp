#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "booster/tensor.hpp"

namespace booster {

/// Labelled image set; images N×C×H×W with pixels in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 10;
  std::string split;
  std::string source;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] Shape image_shape() const { return images.shape().drop_batch(); }
  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;
  /// First n examples (all when n is 0 or exceeds the size).
  [[nodiscard]] Dataset head(std::size_t n) const;
  [[nodiscard]] Tensor batch_images(std::span<const std::size_t> rows) const { return images.gather_batch(rows); }
  [[nodiscard]] std::vector<int> batch_labels(std::span<const std::size_t> rows) const;

  /// FormatError unless labels are in range and pixels lie in [0, 1].
  void validate() const;
};

/// IDX pair: images (magic 0x00000803) and labels (magic 0x00000801), big-endian dims.
Dataset load_mnist_idx(const std::filesystem::path& images_file, const std::filesystem::path& labels_file);
/// Standard file names inside `dir`; split is "train" or "test".
Dataset load_mnist_dir(const std::filesystem::path& dir, const std::string& split);
/// Encode as IDX with bytes round(255 * v).
void save_mnist_idx(const Dataset& data, const std::filesystem::path& images_file,
                    const std::filesystem::path& labels_file);

/// CIFAR-10 binary batch: 3073-byte records, label byte then R, G, B planes.
Dataset load_cifar10_bin(const std::filesystem::path& file);
void save_cifar10_bin(const Dataset& data, const std::filesystem::path& file);

/// Detect MNIST IDX files or CIFAR-10 batches in `dir`. DataError when neither is present.
Dataset load_dataset_dir(const std::filesystem::path& dir, const std::string& split);

}  // namespace booster
