#include "booster/random.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "booster/errors.hpp"

namespace booster {

Tensor uniform_tensor(const Shape& shape, float lo, float hi, Rng& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<float> dist(lo, hi);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

Tensor normal_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (float& v : t.data()) v = dist(rng);
  return t;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with an explicit draw so the sequence does not depend on std::shuffle internals.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng;
  if (is.fail()) throw FormatError("unreadable rng state");
  return rng;
}

}  // namespace booster
