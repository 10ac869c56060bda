#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "booster/autodiff/graph.hpp"
#include "booster/harness/checks.hpp"
#include "booster/harness/reference.hpp"
#include "booster/model/model.hpp"

namespace booster::harness {

/// One differentiable expression: the float32 op under test and its float64 oracle.
struct GradCase {
  std::string name;
  std::vector<Shape> shapes;
  std::vector<bool> wrt;  // inputs to differentiate; empty means all
  float lo = -1.0f, hi = 1.0f;
  std::function<ad::Var(std::span<const ad::Var>)> build;
  std::function<reference::Vec(std::span<const reference::Vec>)> reference;
};

struct GradCheckOptions {
  std::size_t points = 20;
  float h = 1e-3f;
  double tolerance = 1e-3;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 400;  // total draws allowed to find `points` valid points
};

struct GradCheckResult {
  double worst = 0.0;         // largest relative error over accepted points
  std::size_t points = 0;     // accepted points
  std::size_t rejected = 0;   // draws whose stencil crossed a kink
};

/// Autodiff gradient of sum(r * op(inputs)) against central differences of the
/// float64 oracle, at random points. A draw is rejected when some stencil x +- h
/// changes a branch of a piecewise op (ReLU sign, pool argmax, ...), since the
/// difference quotient is not a derivative there.
GradCheckResult gradient_check(const GradCase& c, const GradCheckOptions& opts = {});

/// Every differentiable primitive in the op set.
std::vector<GradCase> primitive_cases();

/// End-to-end check of input_gradient() on a freshly randomized `arch` model per point.
/// `coords` input coordinates are compared per point (0 = all).
GradCheckResult input_gradient_check(const Model& shape_template, std::size_t coords, const GradCheckOptions& opts);

CheckOutcome grad_outcome(const GradCheckResult& r, const GradCheckOptions& opts);

}  // namespace booster::harness
