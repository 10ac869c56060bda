#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace booster {

/// Row-major extents of a tensor.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  [[nodiscard]] std::size_t rank() const { return dims_.size(); }
  [[nodiscard]] std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  [[nodiscard]] std::size_t numel() const;
  [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
  [[nodiscard]] std::string str() const;

  /// Same shape with the leading (batch) axis replaced.
  [[nodiscard]] Shape with_batch(std::size_t n) const;
  /// Shape without the leading axis.
  [[nodiscard]] Shape drop_batch() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Over-aligned storage so vectorized kernels see the same alignment on every run.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{Align}); }
  template <class U>
  bool operator==(const AlignedAllocator<U, Align>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

/// Dense float32 array. Plain value type; gradient bookkeeping lives in ad::Graph.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);
  Tensor(Shape shape, FloatBuffer values);
  Tensor(Shape shape, std::initializer_list<float> values) : Tensor(std::move(shape), FloatBuffer(values)) {}

  static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] float* ptr() { return data_.data(); }
  [[nodiscard]] const float* ptr() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Value of a rank-0 or single-element tensor.
  [[nodiscard]] float item() const;

  /// Reinterpret with a new shape of equal element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  /// Rows [begin, end) along the leading axis.
  [[nodiscard]] Tensor slice_batch(std::size_t begin, std::size_t end) const;
  /// Gather rows along the leading axis.
  [[nodiscard]] Tensor gather_batch(std::span<const std::size_t> rows) const;
  /// Element count of one leading-axis row.
  [[nodiscard]] std::size_t row_size() const;

  void fill(float v);
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  FloatBuffer data_;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Concatenate batches along the leading axis; trailing extents must agree.
Tensor concat_batch(std::span<const Tensor> parts);

float l2_norm(std::span<const float> v);
float linf_norm(std::span<const float> v);

}  // namespace booster
