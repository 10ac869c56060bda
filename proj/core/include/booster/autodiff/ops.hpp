#pragma once

#include <cstddef>
#include <span>

#include "booster/autodiff/graph.hpp"

namespace booster::ad {

enum class Reduction { Mean, Sum, None };

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Elementwise, operands of identical shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float s);
Var add_scalar(Var a, float s);

Var relu(Var x);
Var tanh(Var x);
/// Pass-through gradient on [lo, hi], zero outside.
Var clamp(Var x, float lo, float hi);
/// sign(0) = 0; backward is identically zero.
Var sign(Var x);

Var sum(Var x);
Var mean(Var x);
Var reshape(Var x, Shape shape);
/// N×... -> N×D.
Var flatten(Var x);

/// x: N×C×H×W, kernels: O×C×KH×KW, bias: O.
Var conv2d(Var x, Var kernels, Var bias, Conv2dOptions opts = {});
/// Non-overlapping window (stride = window); ties resolve to the first index in row-major order.
Var maxpool2d(Var x, std::size_t window);
/// x: N×D, weight: O×D, bias: O -> N×O.
Var affine(Var x, Var weight, Var bias);

/// Cross-entropy of softmax(logits) against integer labels. Labels outside
/// [0, classes) raise ConfigError.
Var softmax_cross_entropy(Var logits, std::span<const int> labels, Reduction reduction = Reduction::Mean);
/// Row-wise KL(softmax(p) || softmax(q)); differentiable in both arguments.
Var kl_divergence(Var p_logits, Var q_logits, Reduction reduction = Reduction::Mean);
/// Per-example max(z_y - max_{j != y} z_j, -kappa) -> N.
Var logit_margin(Var logits, std::span<const int> labels, float kappa);

/// Frame N×C×H×W images with a C×(H+2w)×(W+2w) border tensor. The interior of
/// `frame` is ignored; the interior of the output copies `images` exactly.
Var inject(Var images, Var frame, std::size_t width);

}  // namespace booster::ad
