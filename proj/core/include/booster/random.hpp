#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "booster/tensor.hpp"

namespace booster {

/// Every stochastic site draws from one of these, seeded from the plan.
using Rng = std::mt19937_64;

/// Tensor with i.i.d. U[lo, hi) entries.
Tensor uniform_tensor(const Shape& shape, float lo, float hi, Rng& rng);
/// Tensor with i.i.d. N(0, 1) entries.
Tensor normal_tensor(const Shape& shape, Rng& rng);
/// Random permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace booster
