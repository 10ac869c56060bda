#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "booster/model/model.hpp"
#include "booster/tensor.hpp"

// Float64 re-implementations of the forward ops, written as direct loops with no
// shared code with the float32 engine. Used as finite-difference oracles.
namespace booster::reference {

using Vec = std::vector<double>;

Vec to_double(const Tensor& t);

Vec relu(const Vec& x);
Vec tanh(const Vec& x);
Vec clamp(const Vec& x, double lo, double hi);
Vec sign(const Vec& x);

/// x: n×c×h×w, k: o×c×kh×kw, b: o.
Vec conv2d(const Vec& x, const Shape& xs, const Vec& k, const Shape& ks, const Vec& b, std::size_t stride,
           std::size_t pad);
Shape conv2d_shape(const Shape& xs, const Shape& ks, std::size_t stride, std::size_t pad);
Vec maxpool2d(const Vec& x, const Shape& xs, std::size_t window);
/// x: n×d, w: o×d, b: o.
Vec affine(const Vec& x, std::size_t n, std::size_t d, const Vec& w, std::size_t o, const Vec& b);

/// Per-row cross entropy of softmax(z) against labels.
Vec cross_entropy_rows(const Vec& z, std::size_t n, std::size_t k, std::span<const int> labels);
/// Per-row KL(softmax(p) || softmax(q)).
Vec kl_rows(const Vec& p, const Vec& q, std::size_t n, std::size_t k);
/// Per-row max(z_y - max_{j != y} z_j, -kappa).
Vec logit_margin_rows(const Vec& z, std::size_t n, std::size_t k, std::span<const int> labels, double kappa);
/// images n×c×h×w placed inside a c×(h+2w)×(w+2w) frame.
Vec inject(const Vec& images, const Shape& is, const Vec& frame, std::size_t width);

double total(const Vec& v);

/// Logits of `model` for a batch given in float64.
Vec model_logits(const Model& model, const Vec& x, std::size_t n);
/// Summed cross entropy of `model` over a float64 batch.
double model_loss(const Model& model, const Vec& x, std::size_t n, std::span<const int> labels);

}  // namespace booster::reference
