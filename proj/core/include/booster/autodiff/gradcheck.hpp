#pragma once

#include <functional>
#include <span>

#include "booster/tensor.hpp"

namespace booster::ad {

/// Central-difference gradient of a scalar function, one coordinate at a time.
/// The divisor is the step actually realized in float32, (x+h) - (x-h).
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& fn, const Tensor& point, float h);

/// ||a - b||_2 / max(||a||_2, ||b||_2); 0 when both vanish.
double relative_error(std::span<const float> a, std::span<const float> b);

}  // namespace booster::ad
