#include "booster/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "booster/errors.hpp"

namespace booster {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::string& what) {
  if (buf.size() < offset + 4) throw FormatError(what + ": truncated header");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L)); }

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.images = images.gather_batch(rows);
  d.labels = batch_labels(rows);
  d.num_classes = num_classes;
  d.split = split;
  d.source = source;
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset d = *this;
  d.images = images.slice_batch(0, n);
  d.labels.resize(n);
  return d;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

void Dataset::validate() const {
  if (images.shape().rank() != 4 || images.shape()[0] != labels.size()) {
    throw FormatError("dataset images " + images.shape().str() + " vs " + std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw FormatError("label out of range: " + std::to_string(y));
  }
  for (float v : images.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("pixel outside [0, 1]");
  }
}

Dataset load_mnist_idx(const std::filesystem::path& images_file, const std::filesystem::path& labels_file) {
  const auto img = read_file(images_file);
  const auto lab = read_file(labels_file);
  if (read_be32(img, 0, images_file.string()) != 0x00000803) throw FormatError(images_file.string() + ": bad IDX image magic");
  if (read_be32(lab, 0, labels_file.string()) != 0x00000801) throw FormatError(labels_file.string() + ": bad IDX label magic");
  const std::size_t n = read_be32(img, 4, images_file.string());
  const std::size_t rows = read_be32(img, 8, images_file.string());
  const std::size_t cols = read_be32(img, 12, images_file.string());
  const std::size_t nl = read_be32(lab, 4, labels_file.string());
  if (n != nl) throw FormatError("image count " + std::to_string(n) + " != label count " + std::to_string(nl));
  if (img.size() != 16 + n * rows * cols) throw FormatError(images_file.string() + ": payload length does not match header");
  if (lab.size() != 8 + n) throw FormatError(labels_file.string() + ": payload length does not match header");

  Dataset d;
  d.images = Tensor(Shape{n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) d.images[i] = static_cast<float>(img[16 + i]) / 255.0f;
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (lab[8 + i] > 9) throw FormatError("MNIST label out of range: " + std::to_string(lab[8 + i]));
    d.labels[i] = lab[8 + i];
  }
  d.source = "mnist-idx";
  return d;
}

Dataset load_mnist_dir(const std::filesystem::path& dir, const std::string& split) {
  const std::string prefix = split == "train" ? "train" : "t10k";
  Dataset d = load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
  d.split = split;
  return d;
}

void save_mnist_idx(const Dataset& data, const std::filesystem::path& images_file,
                    const std::filesystem::path& labels_file) {
  const Shape& s = data.images.shape();
  if (s.rank() != 4 || s[1] != 1) throw ShapeError("MNIST IDX requires N×1×H×W images, got " + s.str());
  std::ofstream img(images_file, std::ios::binary);
  std::ofstream lab(labels_file, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files");
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(s[0]));
  write_be32(img, static_cast<std::uint32_t>(s[2]));
  write_be32(img, static_cast<std::uint32_t>(s[3]));
  for (float v : data.images.data()) img.put(static_cast<char>(to_byte(v)));
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lab.put(static_cast<char>(y));
}

Dataset load_cifar10_bin(const std::filesystem::path& file) {
  constexpr std::size_t kRecord = 3073;
  constexpr std::size_t kPlane = 32 * 32;
  const auto buf = read_file(file);
  if (buf.empty() || buf.size() % kRecord != 0) {
    throw FormatError(file.string() + ": length " + std::to_string(buf.size()) + " is not a multiple of 3073");
  }
  const std::size_t n = buf.size() / kRecord;
  Dataset d;
  d.images = Tensor(Shape{n, 3, 32, 32});
  d.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = buf.data() + r * kRecord;
    if (rec[0] > 9) throw FormatError("CIFAR-10 label out of range: " + std::to_string(rec[0]));
    d.labels[r] = rec[0];
    float* dst = d.images.ptr() + r * 3 * kPlane;
    for (std::size_t i = 0; i < 3 * kPlane; ++i) dst[i] = static_cast<float>(rec[1 + i]) / 255.0f;
  }
  d.source = "cifar10-bin";
  return d;
}

void save_cifar10_bin(const Dataset& data, const std::filesystem::path& file) {
  const Shape& s = data.images.shape();
  if (s.rank() != 4 || s[1] != 3 || s[2] != 32 || s[3] != 32) throw ShapeError("CIFAR-10 requires N×3×32×32 images");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  const std::size_t row = 3 * 32 * 32;
  for (std::size_t r = 0; r < data.size(); ++r) {
    out.put(static_cast<char>(data.labels[r]));
    for (std::size_t i = 0; i < row; ++i) out.put(static_cast<char>(to_byte(data.images[r * row + i])));
  }
}

Dataset load_dataset_dir(const std::filesystem::path& dir, const std::string& split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  const std::string prefix = split == "train" ? "train" : "t10k";
  if (fs::exists(dir / (prefix + "-images-idx3-ubyte"))) return load_mnist_dir(dir, split);

  std::vector<fs::path> batches;
  if (split == "train") {
    for (int i = 1; i <= 5; ++i) {
      const auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(p)) batches.push_back(p);
    }
  } else if (fs::exists(dir / "test_batch.bin")) {
    batches.push_back(dir / "test_batch.bin");
  }
  if (batches.empty()) throw DataError("no MNIST IDX or CIFAR-10 binary files for split '" + split + "' in " + dir.string());
  std::vector<Tensor> parts;
  Dataset all;
  for (const auto& p : batches) {
    Dataset d = load_cifar10_bin(p);
    parts.push_back(std::move(d.images));
    all.labels.insert(all.labels.end(), d.labels.begin(), d.labels.end());
  }
  all.images = concat_batch(parts);
  all.source = "cifar10-bin";
  all.split = split;
  return all;
}

}  // namespace booster
