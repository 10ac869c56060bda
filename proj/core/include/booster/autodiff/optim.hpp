#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "booster/tensor.hpp"

namespace booster::ad {

/// Heavy-ball SGD: v <- momentum * v + g (+ weight_decay * p); p <- p - lr * v.
class Sgd {
 public:
  Sgd(float lr, float momentum = 0.0f, float weight_decay = 0.0f)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

  [[nodiscard]] float lr() const { return lr_; }
  void set_lr(float lr) { lr_ = lr; }
  [[nodiscard]] float momentum() const { return momentum_; }

  /// Velocity buffers, aligned with the params passed to step(); empty before the first step.
  [[nodiscard]] const std::vector<Tensor>& velocity() const { return velocity_; }
  void set_velocity(std::vector<Tensor> v) { velocity_ = std::move(v); }

 private:
  float lr_;
  float momentum_;
  float weight_decay_;
  std::vector<Tensor> velocity_;
};

struct AdamOptions {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Bias-corrected Adam with per-parameter moment buffers.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);
  [[nodiscard]] std::size_t steps_taken() const { return t_; }

 private:
  AdamOptions opts_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace booster::ad
