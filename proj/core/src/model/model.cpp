#include "booster/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/random.hpp"

namespace booster {
namespace {

constexpr std::size_t kChunk = 64;

std::vector<LayerSpec> registered_layers(std::string_view arch, std::size_t num_classes) {
  using L = LayerSpec;
  if (arch == "cnn-small") {
    return {L::conv(8, 3), L::relu(), L::maxpool(2), L::conv(16, 3), L::relu(), L::maxpool(2),
            L::flatten(), L::affine(64), L::relu(), L::affine(num_classes)};
  }
  if (arch == "cnn-mid") {
    return {L::conv(16, 3, 1), L::relu(), L::conv(16, 3, 1), L::relu(), L::maxpool(2),
            L::conv(32, 3, 1), L::relu(), L::conv(32, 3, 1), L::relu(), L::maxpool(2),
            L::flatten(),      L::affine(128), L::relu(), L::affine(num_classes)};
  }
  throw ConfigError("unknown architecture '" + std::string(arch) + "'");
}

}  // namespace

Model::Model(std::string arch, std::vector<LayerSpec> layers, Shape input_shape, std::size_t num_classes)
    : arch_(std::move(arch)), layers_(std::move(layers)), input_shape_(std::move(input_shape)), num_classes_(num_classes) {
  if (input_shape_.rank() != 3) throw ShapeError("model input must be C×H×W, got " + input_shape_.str());
  // Walk the layer list with symbolic extents to size every parameter.
  std::size_t c = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  std::size_t features = 0;
  bool flat = false;
  int conv_id = 0, fc_id = 0;
  for (const LayerSpec& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv: {
        if (flat) throw ConfigError("conv layer after flatten");
        if (h + 2 * l.padding < l.kernel || w + 2 * l.padding < l.kernel) {
          throw ShapeError("input " + input_shape_.str() + " too small for architecture " + arch_);
        }
        const std::string name = "conv" + std::to_string(++conv_id);
        params_.push_back({name + ".weight", Tensor(Shape{l.out, c, l.kernel, l.kernel})});
        params_.push_back({name + ".bias", Tensor(Shape{l.out})});
        c = l.out;
        h = (h + 2 * l.padding - l.kernel) / l.stride + 1;
        w = (w + 2 * l.padding - l.kernel) / l.stride + 1;
        break;
      }
      case LayerKind::MaxPool:
        h /= l.window;
        w /= l.window;
        if (h == 0 || w == 0) throw ShapeError("input " + input_shape_.str() + " too small for architecture " + arch_);
        break;
      case LayerKind::Flatten:
        features = c * h * w;
        flat = true;
        break;
      case LayerKind::Affine: {
        if (!flat) {
          features = c * h * w;
          flat = true;
        }
        const std::string name = "fc" + std::to_string(++fc_id);
        params_.push_back({name + ".weight", Tensor(Shape{l.out, features})});
        params_.push_back({name + ".bias", Tensor(Shape{l.out})});
        features = l.out;
        break;
      }
      case LayerKind::Relu:
        break;
    }
  }
  if (!flat || features != num_classes_) {
    throw ConfigError("architecture " + arch_ + " does not end in a " + std::to_string(num_classes_) + "-way affine layer");
  }
}

void Model::init_he_uniform(std::uint64_t seed) {
  Rng rng(seed);
  for (NamedTensor& p : params_) {
    const Shape& s = p.value.shape();
    if (s.rank() == 1) {
      p.value.fill(0.0f);
      continue;
    }
    const std::size_t fan_in = s.numel() / s[0];
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (float& v : p.value.data()) v = dist(rng);
  }
}

Model::Forward Model::forward(ad::Graph& graph, ad::Var input, bool param_grads) const {
  Forward fwd;
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const NamedTensor& p : params_) vars.push_back(graph.borrow(p.value, param_grads));
  if (param_grads) fwd.params = vars;

  fwd.logits = apply(input, vars);
  return fwd;
}

ad::Var Model::apply(ad::Var input, std::span<const ad::Var> vars) const {
  if (vars.size() != params_.size()) {
    throw ShapeError("apply: expected " + std::to_string(params_.size()) + " parameter nodes");
  }
  ad::Var h = input;
  std::size_t next = 0;
  for (const LayerSpec& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv:
        h = ad::conv2d(h, vars[next], vars[next + 1], {l.stride, l.padding});
        next += 2;
        break;
      case LayerKind::Relu:
        h = ad::relu(h);
        break;
      case LayerKind::MaxPool:
        h = ad::maxpool2d(h, l.window);
        break;
      case LayerKind::Flatten:
        h = ad::flatten(h);
        break;
      case LayerKind::Affine:
        if (h.shape().rank() != 2) h = ad::flatten(h);
        h = ad::affine(h, vars[next], vars[next + 1]);
        next += 2;
        break;
    }
  }
  return h;
}

std::vector<Tensor*> Model::param_ptrs() {
  std::vector<Tensor*> out;
  out.reserve(params_.size());
  for (NamedTensor& p : params_) out.push_back(&p.value);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& p : params_) n += p.value.size();
  return n;
}

void Model::check_batch(const Tensor& batch) const {
  if (batch.shape().rank() != 4 || batch.shape().drop_batch() != input_shape_) {
    throw ShapeError("batch " + batch.shape().str() + " does not match model input N×" + input_shape_.str());
  }
}

Model build_cnn(std::string_view arch, std::size_t num_classes, const Shape& input_shape, std::uint64_t seed) {
  Model m(std::string(arch), registered_layers(arch, num_classes), input_shape, num_classes);
  m.init_he_uniform(seed);
  return m;
}

Tensor predict(const Model& model, const Tensor& batch) {
  model.check_batch(batch);
  const std::size_t n = batch.shape()[0];
  Tensor out(Shape{n, model.num_classes()});
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    ad::Graph g;
    const Tensor chunk = batch.slice_batch(b, e);
    const Tensor& logits = model.forward(g, g.borrow(chunk)).logits.value();
    std::copy(logits.data().begin(), logits.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * model.num_classes()));
  }
  return out;
}

Tensor input_gradient(const Model& model, const Tensor& batch, std::span<const int> labels) {
  model.check_batch(batch);
  const std::size_t n = batch.shape()[0];
  if (labels.size() != n) throw ShapeError("input_gradient: label count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw ConfigError("input_gradient: label " + std::to_string(y) + " out of range");
    }
  }
  Tensor out(batch.shape());
  const std::size_t row = batch.row_size();
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    ad::Graph g;
    ad::Var x = g.leaf(batch.slice_batch(b, e), true);
    ad::Var loss = ad::softmax_cross_entropy(model.forward(g, x).logits, labels.subspan(b, e - b), ad::Reduction::Sum);
    g.backward(loss);
    const Tensor& gx = g.grad(x);
    std::copy(gx.data().begin(), gx.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * row));
  }
  return out;
}

std::vector<float> per_example_loss(const Model& model, const Tensor& batch, std::span<const int> labels) {
  const Tensor logits = predict(model, batch);
  ad::Graph g;
  const Tensor losses =
      ad::softmax_cross_entropy(g.borrow(logits), labels, ad::Reduction::None).value();
  return {losses.data().begin(), losses.data().end()};
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const float* z = logits.ptr() + r * k;
    out[r] = static_cast<int>(std::max_element(z, z + k) - z);
  }
  return out;
}

}  // namespace booster
