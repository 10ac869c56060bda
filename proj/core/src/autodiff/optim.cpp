#include "booster/autodiff/optim.hpp"

#include <cmath>

#include "booster/errors.hpp"

namespace booster::ad {
namespace {

void check_aligned(std::span<Tensor* const> params, std::span<const Tensor> grads, const char* who) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw ShapeError(std::string(who) + ": param " + params[i]->shape().str() + " vs grad " + grads[i].shape().str());
    }
  }
}

void init_buffers(std::vector<Tensor>& buffers, std::span<Tensor* const> params, const char* who) {
  if (buffers.empty()) {
    for (const Tensor* p : params) buffers.emplace_back(p->shape(), 0.0f);
    return;
  }
  if (buffers.size() != params.size()) throw ShapeError(std::string(who) + ": parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (buffers[i].shape() != params[i]->shape()) throw ShapeError(std::string(who) + ": state shape mismatch");
  }
}

}  // namespace

void Sgd::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  check_aligned(params, grads, "sgd");
  init_buffers(velocity_, params, "sgd");
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i]->ptr();
    float* v = velocity_[i].ptr();
    const float* g = grads[i].ptr();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      v[j] = momentum_ * v[j] + g[j] + weight_decay_ * p[j];
      p[j] -= lr_ * v[j];
    }
  }
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  check_aligned(params, grads, "adam");
  init_buffers(m_, params, "adam");
  init_buffers(v_, params, "adam");
  ++t_;
  const double c1 = 1.0 - std::pow(static_cast<double>(opts_.beta1), static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(static_cast<double>(opts_.beta2), static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i]->ptr();
    float* m = m_[i].ptr();
    float* v = v_[i].ptr();
    const float* g = grads[i].ptr();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      m[j] = opts_.beta1 * m[j] + (1.0f - opts_.beta1) * g[j];
      v[j] = opts_.beta2 * v[j] + (1.0f - opts_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= static_cast<float>(opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps));
    }
  }
}

}  // namespace booster::ad
