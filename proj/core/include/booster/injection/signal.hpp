#pragma once

#include <cstddef>
#include <span>

#include "booster/random.hpp"
#include "booster/tensor.hpp"

namespace booster {

/// A universal frame of width w around C×H×W images, stored at the framed
/// resolution C×(H+2w)×(W+2w). Interior coordinates are always zero and ignored;
/// frame values stay in [0, 1].
class BoosterSignal {
 public:
  BoosterSignal() = default;
  /// All-zero signal (b_null).
  BoosterSignal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width);

  [[nodiscard]] std::size_t width() const { return width_; }
  [[nodiscard]] std::size_t channels() const { return channels_; }
  [[nodiscard]] std::size_t image_height() const { return height_; }
  [[nodiscard]] std::size_t image_width() const { return image_width_; }
  [[nodiscard]] std::size_t canvas_height() const { return height_ + 2 * width_; }
  [[nodiscard]] std::size_t canvas_width() const { return image_width_ + 2 * width_; }
  [[nodiscard]] Shape image_shape() const { return Shape{channels_, height_, image_width_}; }
  [[nodiscard]] Shape canvas_shape() const { return Shape{channels_, canvas_height(), canvas_width()}; }

  [[nodiscard]] const Tensor& frame() const { return frame_; }
  /// Replace the frame values; the interior is re-zeroed and values clipped to [0, 1].
  void set_frame(Tensor frame);

  [[nodiscard]] bool on_border(std::size_t y, std::size_t x) const;
  /// 1 on frame coordinates, 0 on the interior; shape C×H'×W'.
  [[nodiscard]] Tensor border_mask() const;
  /// 1 on interior coordinates, 0 on the frame.
  [[nodiscard]] Tensor interior_mask() const;
  /// Number of trainable (frame) coordinates; zero when w = 0.
  [[nodiscard]] std::size_t trainable_size() const;
  [[nodiscard]] bool interior_is_zero() const;

  friend bool operator==(const BoosterSignal&, const BoosterSignal&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t image_width_ = 0;
  Tensor frame_;
};

BoosterSignal null_signal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width);

/// Frame values drawn from U[0, 1).
BoosterSignal random_signal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width,
                            Rng& rng);

/// B(x, b): N×C×H×W -> N×C×(H+2w)×(W+2w). The interior is a bit-exact copy of `batch`.
Tensor inject(const Tensor& batch, const BoosterSignal& signal);

/// Inverse of the interior placement: N×C×H'×W' -> N×C×(H'-2w)×(W'-2w).
Tensor center_crop(const Tensor& canvas, std::size_t width);

/// frame <- clip(frame - eta * mask(grad), 0, 1). NaN/Inf in `grad` raises NumericalError.
BoosterSignal apply_signal_step(const BoosterSignal& signal, const Tensor& grad, float eta);

/// Gradient step with optional heavy-ball momentum on the signal; momentum 0 is the
/// plain update of apply_signal_step.
class SignalStepper {
 public:
  explicit SignalStepper(float momentum = 0.0f) : momentum_(momentum) {}

  BoosterSignal step(const BoosterSignal& signal, const Tensor& grad, float eta);
  [[nodiscard]] const Tensor& velocity() const { return velocity_; }
  void set_velocity(Tensor v) { velocity_ = std::move(v); }

 private:
  float momentum_;
  Tensor velocity_;
};

/// Uniform draw from `pool`; ConfigError when empty.
const BoosterSignal& random_signal_choice(std::span<const BoosterSignal> pool, Rng& rng);

}  // namespace booster
