#include "booster/injection/signal.hpp"

#include <algorithm>
#include <cmath>

#include "booster/errors.hpp"

namespace booster {

BoosterSignal::BoosterSignal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width)
    : width_(width),
      channels_(channels),
      height_(height),
      image_width_(image_width),
      frame_(Shape{channels, height + 2 * width, image_width + 2 * width}, 0.0f) {}

bool BoosterSignal::on_border(std::size_t y, std::size_t x) const {
  return y < width_ || y >= width_ + height_ || x < width_ || x >= width_ + image_width_;
}

void BoosterSignal::set_frame(Tensor frame) {
  if (frame.shape() != canvas_shape()) {
    throw ShapeError("signal frame " + frame.shape().str() + " expected " + canvas_shape().str());
  }
  const std::size_t fh = canvas_height(), fw = canvas_width();
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t y = 0; y < fh; ++y) {
      for (std::size_t x = 0; x < fw; ++x) {
        float& v = frame[(c * fh + y) * fw + x];
        v = on_border(y, x) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
      }
    }
  }
  frame_ = std::move(frame);
}

Tensor BoosterSignal::border_mask() const {
  Tensor m(canvas_shape(), 0.0f);
  const std::size_t fh = canvas_height(), fw = canvas_width();
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t y = 0; y < fh; ++y) {
      for (std::size_t x = 0; x < fw; ++x) {
        if (on_border(y, x)) m[(c * fh + y) * fw + x] = 1.0f;
      }
    }
  }
  return m;
}

Tensor BoosterSignal::interior_mask() const {
  Tensor m = border_mask();
  for (float& v : m.data()) v = 1.0f - v;
  return m;
}

std::size_t BoosterSignal::trainable_size() const {
  return channels_ * (canvas_height() * canvas_width() - height_ * image_width_);
}

bool BoosterSignal::interior_is_zero() const {
  const std::size_t fh = canvas_height(), fw = canvas_width();
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t y = width_; y < width_ + height_; ++y) {
      for (std::size_t x = width_; x < width_ + image_width_; ++x) {
        if (frame_[(c * fh + y) * fw + x] != 0.0f) return false;
      }
    }
  }
  return true;
}

BoosterSignal null_signal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width) {
  return BoosterSignal(width, channels, height, image_width);
}

BoosterSignal random_signal(std::size_t width, std::size_t channels, std::size_t height, std::size_t image_width,
                            Rng& rng) {
  BoosterSignal s(width, channels, height, image_width);
  s.set_frame(uniform_tensor(s.canvas_shape(), 0.0f, 1.0f, rng));
  return s;
}

Tensor inject(const Tensor& batch, const BoosterSignal& signal) {
  const Shape& s = batch.shape();
  if (s.rank() != 4) throw ShapeError("inject: batch must be N×C×H×W, got " + s.str());
  if (s[1] != signal.channels()) {
    throw ShapeError("inject: batch has " + std::to_string(s[1]) + " channels, signal " +
                     std::to_string(signal.channels()));
  }
  if (s[2] != signal.image_height() || s[3] != signal.image_width()) {
    throw ShapeError("inject: batch " + s.str() + " does not fit signal " + signal.image_shape().str());
  }
  const std::size_t n = s[0], c = s[1], h = s[2], w = s[3], width = signal.width();
  const std::size_t fh = signal.canvas_height(), fw = signal.canvas_width();
  Tensor out(Shape{n, c, fh, fw});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      float* dst = out.ptr() + (b * c + ci) * fh * fw;
      std::copy_n(signal.frame().ptr() + ci * fh * fw, fh * fw, dst);
      const float* src = batch.ptr() + (b * c + ci) * h * w;
      for (std::size_t y = 0; y < h; ++y) std::copy_n(src + y * w, w, dst + (y + width) * fw + width);
    }
  }
  return out;
}

Tensor center_crop(const Tensor& canvas, std::size_t width) {
  const Shape& s = canvas.shape();
  if (s.rank() != 4 || s[2] < 2 * width || s[3] < 2 * width) {
    throw ShapeError("center_crop: cannot remove width " + std::to_string(width) + " from " + s.str());
  }
  const std::size_t n = s[0], c = s[1], fh = s[2], fw = s[3];
  const std::size_t h = fh - 2 * width, w = fw - 2 * width;
  Tensor out(Shape{n, c, h, w});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(canvas.ptr() + plane * fh * fw + (y + width) * fw + width, w, out.ptr() + plane * h * w + y * w);
    }
  }
  return out;
}

BoosterSignal apply_signal_step(const BoosterSignal& signal, const Tensor& grad, float eta) {
  SignalStepper plain;
  return plain.step(signal, grad, eta);
}

BoosterSignal SignalStepper::step(const BoosterSignal& signal, const Tensor& grad, float eta) {
  if (grad.shape() != signal.canvas_shape()) {
    throw ShapeError("signal gradient " + grad.shape().str() + " expected " + signal.canvas_shape().str());
  }
  if (!grad.all_finite()) throw NumericalError("non-finite booster signal gradient");
  if (velocity_.shape() != grad.shape()) velocity_ = Tensor(grad.shape(), 0.0f);
  Tensor frame = signal.frame();
  const std::size_t fh = signal.canvas_height(), fw = signal.canvas_width();
  for (std::size_t c = 0; c < signal.channels(); ++c) {
    for (std::size_t y = 0; y < fh; ++y) {
      for (std::size_t x = 0; x < fw; ++x) {
        if (!signal.on_border(y, x)) continue;
        const std::size_t i = (c * fh + y) * fw + x;
        velocity_[i] = momentum_ * velocity_[i] + grad[i];
        frame[i] -= eta * velocity_[i];
      }
    }
  }
  BoosterSignal out = signal;
  out.set_frame(std::move(frame));
  return out;
}

const BoosterSignal& random_signal_choice(std::span<const BoosterSignal> pool, Rng& rng) {
  if (pool.empty()) throw ConfigError("random_signal_choice: empty signal pool");
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

}  // namespace booster
