#pragma once

#include <filesystem>
#include <string>

#include "booster/io/dataset.hpp"
#include "booster/random.hpp"

namespace booster::test {

inline std::filesystem::path data_dir() { return BOOSTER_TEST_DATA_DIR; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("booster_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline const Dataset& mnist_train() {
  static const Dataset d = load_mnist_dir(data_dir(), "train");
  return d;
}

inline const Dataset& mnist_test() {
  static const Dataset d = load_mnist_dir(data_dir(), "test");
  return d;
}

inline Dataset random_images(std::size_t n, Shape image, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.images = uniform_tensor(Shape{n, image[0], image[1], image[2]}, 0.0f, 1.0f, rng);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng() % 10));
  return d;
}

}  // namespace booster::test
