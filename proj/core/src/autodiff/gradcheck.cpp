#include "booster/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "booster/errors.hpp"

namespace booster::ad {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& fn, const Tensor& point, float h) {
  if (!(h > 0.0f)) throw ConfigError("finite_diff_grad: step must be positive");
  Tensor grad(point.shape(), 0.0f);
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const float x = point[i];
    const float xp = x + h;
    const float xm = x - h;
    probe[i] = xp;
    const double fp = fn(probe);
    probe[i] = xm;
    const double fm = fn(probe);
    probe[i] = x;
    grad[i] = static_cast<float>((fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm)));
  }
  return grad;
}

double relative_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    diff += d * d;
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace booster::ad
