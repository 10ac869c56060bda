#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "booster/autodiff/graph.hpp"
#include "booster/tensor.hpp"

namespace booster {

enum class LayerKind { Conv, Relu, MaxPool, Flatten, Affine };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t out = 0;      // output channels (Conv) or features (Affine)
  std::size_t kernel = 3;   // Conv
  std::size_t stride = 1;   // Conv
  std::size_t padding = 0;  // Conv
  std::size_t window = 2;   // MaxPool

  static LayerSpec conv(std::size_t out, std::size_t kernel, std::size_t padding = 0) {
    return {LayerKind::Conv, out, kernel, 1, padding, 2};
  }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec maxpool(std::size_t window) { return {LayerKind::MaxPool, 0, 3, 1, 0, window}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec affine(std::size_t out) { return {LayerKind::Affine, out}; }
};

/// Feed-forward classifier f_theta over C×H×W inputs in [0, 1].
class Model {
 public:
  struct Forward {
    ad::Var logits;
    std::vector<ad::Var> params;  // empty unless parameter gradients were requested
  };

  Model() = default;
  /// Infers parameter shapes from `layers`; parameters start at zero.
  Model(std::string arch, std::vector<LayerSpec> layers, Shape input_shape, std::size_t num_classes);

  /// He-uniform weights, zero biases.
  void init_he_uniform(std::uint64_t seed);

  /// Record the forward pass of `input` (N×C×H×W) on `graph`. Parameters are borrowed,
  /// so the model must outlive the graph.
  [[nodiscard]] Forward forward(ad::Graph& graph, ad::Var input, bool param_grads = false) const;
  /// Same layers applied with caller-supplied parameter nodes (aligned with params()).
  [[nodiscard]] ad::Var apply(ad::Var input, std::span<const ad::Var> params) const;

  [[nodiscard]] const std::string& arch() const { return arch_; }
  [[nodiscard]] const std::vector<LayerSpec>& layers() const { return layers_; }
  [[nodiscard]] const Shape& input_shape() const { return input_shape_; }
  [[nodiscard]] std::size_t num_classes() const { return num_classes_; }

  [[nodiscard]] std::vector<NamedTensor>& params() { return params_; }
  [[nodiscard]] const std::vector<NamedTensor>& params() const { return params_; }
  [[nodiscard]] std::vector<Tensor*> param_ptrs();
  [[nodiscard]] std::size_t parameter_count() const;

  /// Throws ShapeError unless `batch` is N×input_shape.
  void check_batch(const Tensor& batch) const;

 private:
  std::string arch_;
  std::vector<LayerSpec> layers_;
  Shape input_shape_;
  std::size_t num_classes_ = 0;
  std::vector<NamedTensor> params_;
};

/// Registered architectures: "cnn-small" (2 conv + 2 affine), "cnn-mid" (4 conv + 2 affine).
/// Unknown names raise ConfigError.
Model build_cnn(std::string_view arch, std::size_t num_classes, const Shape& input_shape, std::uint64_t seed = 0);

/// Logits N×classes; evaluated in chunks, no state change.
Tensor predict(const Model& model, const Tensor& batch);

/// d CE(f(x_i), y_i) / d x_i for every example, same shape as `batch`.
Tensor input_gradient(const Model& model, const Tensor& batch, std::span<const int> labels);

/// Per-example cross-entropy.
std::vector<float> per_example_loss(const Model& model, const Tensor& batch, std::span<const int> labels);

std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace booster
