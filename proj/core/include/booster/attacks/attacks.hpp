#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "booster/model/model.hpp"
#include "booster/random.hpp"
#include "booster/tensor.hpp"

namespace booster {

enum class AttackFamily { None, Fgsm, Pgd, Cw };

/// Loss the inner maximization ascends.
enum class AttackObjective {
  CrossEntropy,  // CE(f(x + p), y)
  KlToClean,     // KL(f(x) || f(x + p)), the TRADES inner loss
};

/// Budget and schedule of one attack. epsilon is an L-inf radius in [0, 1] pixel units.
struct AttackSpec {
  AttackFamily family = AttackFamily::Pgd;
  float epsilon = 8.0f / 255.0f;
  float step_size = 2.0f / 255.0f;
  std::size_t steps = 7;
  std::size_t restarts = 1;
  bool random_start = true;
  std::size_t cw_iters = 200;
  float cw_lr = 0.01f;
  float cw_c = 1.0f;
  float cw_kappa = 0.0f;

  /// ConfigError on epsilon < 0, non-positive PGD step, or zero steps.
  void validate() const;
};

/// Named profiles: "natural" (no attack), "fgsm", "pgd7" (alpha = eps/4),
/// "pgd20" (alpha = eps/10), "cw200". Unknown names raise ConfigError.
AttackSpec attack_profile(std::string_view name, float epsilon = 8.0f / 255.0f);
bool is_attack_profile(std::string_view name);

struct AttackOptions {
  /// Canvas-shaped (C×H×W) 0/1 mask of attackable coordinates; nullptr means the full canvas.
  const Tensor* region = nullptr;
  AttackObjective objective = AttackObjective::CrossEntropy;
};

/// p clipped to [-eps, eps], then x + p clipped to [0, 1] and p recomputed as (clipped sum) - x.
Tensor project_linf(const Tensor& p, float epsilon, const Tensor& x);

/// Single signed-gradient step of size epsilon.
Tensor fgsm(const Model& model, const Tensor& batch, std::span<const int> labels, float epsilon,
            const AttackOptions& opts = {});

/// L-inf projected gradient ascent; optional uniform random start.
Tensor pgd(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec, Rng& rng,
           const AttackOptions& opts = {});

/// Carlini-Wagner L2 with a single constant c, optimized by Adam in tanh space.
/// Per example returns the smallest-distortion perturbation that flipped the
/// prediction, or the last iterate when none did.
Tensor cw_l2(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec,
             const AttackOptions& opts = {});

/// Dispatch on spec.family; AttackFamily::None yields zeros.
Tensor perturb(const Model& model, const Tensor& batch, std::span<const int> labels, const AttackSpec& spec, Rng& rng,
               const AttackOptions& opts = {});

/// Per-example value of the attack objective at batch + p.
std::vector<float> attack_loss(const Model& model, const Tensor& batch, std::span<const int> labels,
                               AttackObjective objective, const Tensor* clean_logits = nullptr);

}  // namespace booster
