#include "booster/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <numeric>
#include <sstream>

#include "booster/errors.hpp"

namespace booster {

std::size_t Shape::numel() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << ']';
  return os.str();
}

Shape Shape::with_batch(std::size_t n) const {
  if (dims_.empty()) throw ShapeError("with_batch on rank-0 shape");
  auto d = dims_;
  d[0] = n;
  return Shape(std::move(d));
}

Shape Shape::drop_batch() const {
  if (dims_.empty()) throw ShapeError("drop_batch on rank-0 shape");
  return Shape(std::vector<std::size_t>(dims_.begin() + 1, dims_.end()));
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : Tensor(std::move(shape), FloatBuffer(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, FloatBuffer values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_.numel() != data_.size()) {
    throw ShapeError("tensor shape " + shape_.str() + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

float Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  if (shape.numel() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  shape_ = std::move(shape);
}

std::size_t Tensor::row_size() const {
  if (shape_.rank() == 0) throw ShapeError("row_size on rank-0 tensor");
  return shape_[0] == 0 ? shape_.drop_batch().numel() : data_.size() / shape_[0];
}

Tensor Tensor::slice_batch(std::size_t begin, std::size_t end) const {
  if (shape_.rank() == 0 || begin > end || end > shape_[0]) {
    throw ShapeError("slice_batch [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + shape_.str());
  }
  const std::size_t row = row_size();
  return Tensor(shape_.with_batch(end - begin),
                FloatBuffer(data_.begin() + static_cast<std::ptrdiff_t>(begin * row),
                                   data_.begin() + static_cast<std::ptrdiff_t>(end * row)));
}

Tensor Tensor::gather_batch(std::span<const std::size_t> rows) const {
  if (shape_.rank() == 0) throw ShapeError("gather_batch on rank-0 tensor");
  const std::size_t row = row_size();
  Tensor out(shape_.with_batch(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= shape_[0]) throw ShapeError("gather_batch index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * row), row,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  return out;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  // Exponent-bits test; branch-free so the loop vectorizes.
  constexpr std::uint32_t kExp = 0x7f800000u;
  std::uint32_t bad = 0;
  for (float v : data_) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    bad |= static_cast<std::uint32_t>((bits & kExp) == kExp);
  }
  return bad == 0;
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_batch of nothing");
  const Shape row = parts.front().shape().drop_batch();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.shape().drop_batch() != row) throw ShapeError("concat_batch row shape mismatch");
    n += p.shape()[0];
  }
  std::vector<float> values;
  values.reserve(n * row.numel());
  for (const auto& p : parts) values.insert(values.end(), p.data().begin(), p.data().end());
  return Tensor(parts.front().shape().with_batch(n), std::move(values));
}

float l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return static_cast<float>(std::sqrt(s));
}

float linf_norm(std::span<const float> v) {
  float m = 0.0f;
  for (float x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace booster
