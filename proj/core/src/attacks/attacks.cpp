#include "booster/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "booster/autodiff/ops.hpp"
#include "booster/autodiff/optim.hpp"
#include "booster/errors.hpp"

namespace booster {
namespace {

constexpr std::size_t kChunk = 64;

void apply_region(Tensor& p, const Tensor* region) {
  if (region == nullptr) return;
  const std::size_t row = region->size();
  if (p.row_size() != row) throw ShapeError("attack region " + region->shape().str() + " vs batch " + p.shape().str());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] *= (*region)[i % row];
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

// Gradient of the summed objective with respect to the model input.
Tensor objective_gradient(const Model& model, const Tensor& input, std::span<const int> labels,
                          AttackObjective objective, const Tensor* clean_logits) {
  const std::size_t n = input.shape()[0];
  const std::size_t row = input.row_size();
  Tensor out(input.shape());
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    ad::Graph g;
    ad::Var x = g.leaf(input.slice_batch(b, e), true);
    ad::Var logits = model.forward(g, x).logits;
    ad::Var loss;
    if (objective == AttackObjective::CrossEntropy) {
      loss = ad::softmax_cross_entropy(logits, labels.subspan(b, e - b), ad::Reduction::Sum);
    } else {
      ad::Var clean = g.leaf(clean_logits->slice_batch(b, e));
      loss = ad::kl_divergence(clean, logits, ad::Reduction::Sum);
    }
    g.backward(loss);
    const Tensor& gx = g.grad(x);
    std::copy(gx.data().begin(), gx.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * row));
  }
  return out;
}

}  // namespace

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0f)) throw ConfigError("attack epsilon must be >= 0");
  if (family == AttackFamily::Pgd && epsilon > 0.0f && !(step_size > 0.0f)) throw ConfigError("PGD step size must be > 0");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (restarts < 1) throw ConfigError("attack restarts must be >= 1");
  if (family == AttackFamily::Cw && (cw_iters < 1 || !(cw_lr > 0.0f) || cw_c < 0.0f)) {
    throw ConfigError("invalid CW hyperparameters");
  }
}

AttackSpec attack_profile(std::string_view name, float epsilon) {
  AttackSpec s;
  s.epsilon = epsilon;
  if (name == "natural" || name == "none") {
    s.family = AttackFamily::None;
    s.steps = 1;
  } else if (name == "fgsm") {
    s.family = AttackFamily::Fgsm;
    s.steps = 1;
    s.step_size = epsilon;
    s.random_start = false;
  } else if (name == "pgd7") {
    s.family = AttackFamily::Pgd;
    s.steps = 7;
    s.step_size = epsilon / 4.0f;
  } else if (name == "pgd20") {
    s.family = AttackFamily::Pgd;
    s.steps = 20;
    s.step_size = epsilon / 10.0f;
  } else if (name == "cw200") {
    s.family = AttackFamily::Cw;
    s.steps = 1;
    s.cw_iters = 200;
    s.cw_lr = 0.01f;
    s.cw_c = 1.0f;
    s.random_start = false;
  } else {
    throw ConfigError("unknown attack profile '" + std::string(name) + "'");
  }
  return s;
}

bool is_attack_profile(std::string_view name) {
  return name == "natural" || name == "none" || name == "fgsm" || name == "pgd7" || name == "pgd20" ||
         name == "cw200";
}

Tensor project_linf(const Tensor& p, float epsilon, const Tensor& x) {
  if (p.shape() != x.shape()) throw ShapeError("project_linf: shape mismatch");
  Tensor out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const float clipped = std::clamp(p[i], -epsilon, epsilon);
    const float sum = std::clamp(x[i] + clipped, 0.0f, 1.0f);
    out[i] = sum - x[i];
  }
  return out;
}

std::vector<float> attack_loss(const Model& model, const Tensor& batch, std::span<const int> labels,
                               AttackObjective objective, const Tensor* clean_logits) {
  if (objective == AttackObjective::CrossEntropy) return per_example_loss(model, batch, labels);
  const Tensor logits = predict(model, batch);
  ad::Graph g;
  const Tensor kl = ad::kl_divergence(g.borrow(*clean_logits), g.borrow(logits), ad::Reduction::None).value();
  return {kl.data().begin(), kl.data().end()};
}

Tensor fgsm(const Model& model, const Tensor& batch, std::span<const int> labels, float epsilon,
            const AttackOptions& opts) {
  model.check_batch(batch);
  Tensor clean_logits;
  if (opts.objective == AttackObjective::KlToClean) clean_logits = predict(model, batch);
  Tensor grad = objective_gradient(model, batch, labels, opts.objective, &clean_logits);
  Tensor p(batch.shape());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = grad[i] > 0.0f ? epsilon : (grad[i] < 0.0f ? -epsilon : 0.0f);
  }
  apply_region(p, opts.region);
  return project_linf(p, epsilon, batch);
}

Tensor pgd(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec, Rng& rng,
           const AttackOptions& opts) {
  spec.validate();
  model.check_batch(batch);
  const std::size_t n = batch.shape()[0];
  const std::size_t row = batch.row_size();
  if (spec.epsilon == 0.0f || n == 0) return Tensor(batch.shape(), 0.0f);

  Tensor clean_logits;
  if (opts.objective == AttackObjective::KlToClean) clean_logits = predict(model, batch);

  Tensor best;
  std::vector<float> best_loss;
  for (std::size_t r = 0; r < spec.restarts; ++r) {
    Tensor p = spec.random_start ? uniform_tensor(batch.shape(), -spec.epsilon, spec.epsilon, rng)
                                 : Tensor(batch.shape(), 0.0f);
    apply_region(p, opts.region);
    p = project_linf(p, spec.epsilon, batch);
    for (std::size_t k = 0; k < spec.steps; ++k) {
      const Tensor grad = objective_gradient(model, add_tensors(batch, p), labels, opts.objective, &clean_logits);
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] += spec.step_size * (grad[i] > 0.0f ? 1.0f : (grad[i] < 0.0f ? -1.0f : 0.0f));
      }
      apply_region(p, opts.region);
      p = project_linf(p, spec.epsilon, batch);
    }
    if (spec.restarts == 1) return p;

    const auto loss = attack_loss(model, add_tensors(batch, p), labels, opts.objective, &clean_logits);
    if (r == 0) {
      best = std::move(p);
      best_loss = loss;
      continue;
    }
    for (std::size_t b = 0; b < n; ++b) {
      if (loss[b] > best_loss[b]) {
        best_loss[b] = loss[b];
        std::copy_n(p.ptr() + b * row, row, best.ptr() + b * row);
      }
    }
  }
  return best;
}

Tensor cw_l2(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec,
             const AttackOptions& opts) {
  spec.validate();
  model.check_batch(batch);
  const std::size_t n = batch.shape()[0];
  const std::size_t row = batch.row_size();
  Tensor result(batch.shape(), 0.0f);

  Tensor region_full;
  if (opts.region != nullptr) {
    region_full = Tensor(batch.shape());
    for (std::size_t i = 0; i < region_full.size(); ++i) region_full[i] = (*opts.region)[i % row];
  }

  for (std::size_t b0 = 0; b0 < n; b0 += kChunk) {
    const std::size_t b1 = std::min(n, b0 + kChunk);
    const std::size_t m = b1 - b0;
    const Tensor x = batch.slice_batch(b0, b1);
    const auto ys = labels.subspan(b0, m);
    const Tensor mask = opts.region ? region_full.slice_batch(b0, b1) : Tensor();

    Tensor w(x.shape());
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::atanh(std::clamp(2.0f * x[i] - 1.0f, -1.0f + 1e-6f, 1.0f - 1e-6f));
    }
    ad::Adam adam({spec.cw_lr, 0.9f, 0.999f, 1e-8f});
    std::vector<float> best_dist(m, std::numeric_limits<float>::infinity());
    Tensor last(x.shape());
    Tensor best(x.shape());
    std::vector<bool> found(m, false);

    for (std::size_t it = 0; it < spec.cw_iters; ++it) {
      ad::Graph g;
      ad::Var wv = g.borrow(w, true);
      ad::Var xv = g.borrow(x);
      ad::Var adv = ad::add_scalar(ad::scale(ad::tanh(wv), 0.5f), 0.5f);
      ad::Var delta = ad::sub(adv, xv);
      if (opts.region != nullptr) delta = ad::mul(delta, g.borrow(mask));
      ad::Var logits = model.forward(g, ad::add(xv, delta)).logits;
      ad::Var dist = ad::sum(ad::mul(delta, delta));
      ad::Var hinge = ad::scale(ad::sum(ad::logit_margin(logits, ys, spec.cw_kappa)), spec.cw_c);
      ad::Var objective = ad::add(dist, hinge);

      // Record this iterate before stepping.
      const Tensor& d = delta.value();
      const auto pred = argmax_rows(logits.value());
      for (std::size_t b = 0; b < m; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < row; ++i) s += static_cast<double>(d[b * row + i]) * d[b * row + i];
        if (pred[b] != ys[b] && s < best_dist[b]) {
          best_dist[b] = static_cast<float>(s);
          found[b] = true;
          std::copy_n(d.ptr() + b * row, row, best.ptr() + b * row);
        }
      }
      last = d;

      g.backward(objective);
      std::vector<Tensor*> params{&w};
      std::vector<Tensor> grads{g.grad(wv)};
      adam.step(params, grads);
    }
    for (std::size_t b = 0; b < m; ++b) {
      const Tensor& src = found[b] ? best : last;
      std::copy_n(src.ptr() + b * row, row, result.ptr() + (b0 + b) * row);
    }
  }
  // Keep x + p inside the valid pixel range after float rounding.
  return project_linf(result, std::numeric_limits<float>::infinity(), batch);
}

Tensor perturb(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec, Rng& rng,
               const AttackOptions& opts) {
  switch (spec.family) {
    case AttackFamily::None:
      return Tensor(batch.shape(), 0.0f);
    case AttackFamily::Fgsm:
      return fgsm(model, batch, labels, spec.epsilon, opts);
    case AttackFamily::Pgd:
      return pgd(model, batch, labels, spec, rng, opts);
    case AttackFamily::Cw:
      return cw_l2(model, batch, labels, spec, opts);
  }
  return Tensor(batch.shape(), 0.0f);
}

}  // namespace booster
