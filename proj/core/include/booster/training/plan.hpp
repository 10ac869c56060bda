#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "booster/attacks/attacks.hpp"

namespace booster {

enum class AtLoss { Madry, Trades };

/// Configuration of the four-step booster training loop. Mirrors plan.json.
struct TrainPlan {
  std::string arch = "cnn-small";
  std::size_t epochs = 10;
  std::size_t batch_size = 128;

  // Classifier optimizer (steps 1 and 4).
  float lr = 0.05f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  std::string lr_schedule = "cosine";  // "cosine" | "constant"

  AtLoss at_loss = AtLoss::Madry;
  float trades_beta = 6.0f;

  float epsilon = 8.0f / 255.0f;
  std::string step1_attack = "pgd7";
  std::string step3_attack = "pgd7";
  std::string step4_attack = "pgd7";

  // Booster signal.
  std::size_t signal_width = 4;
  bool signal_steps = true;          // false freezes b at b_null
  std::string signal_init = "uniform";  // "uniform" | "zero"
  std::size_t subset_size = 512;     // m
  std::size_t signal_iters = 5;      // K
  float signal_step = 1.0f;          // eta
  std::string signal_schedule = "constant";  // "cosine" | "constant"
  float signal_momentum = 0.0f;
  std::size_t alternations = 1;      // b updates per generated perturbation set in step 3

  // Per-epoch evaluation rows written to metrics.csv.
  std::string eval_attack = "natural";
  std::size_t eval_examples = 1000;

  std::size_t num_classes = 10;
  std::uint64_t seed = 0;

  /// ConfigError describing the first invalid field.
  void validate() const;

  [[nodiscard]] AttackSpec attack(const std::string& profile) const { return attack_profile(profile, epsilon); }
  /// Classifier learning rate used during `epoch` (0-based).
  [[nodiscard]] float lr_at(std::size_t epoch) const;
  /// Signal step size used during `epoch`.
  [[nodiscard]] float signal_step_at(std::size_t epoch) const;
};

TrainPlan plan_from_json(const std::string& text);
std::string plan_to_json(const TrainPlan& plan);
TrainPlan load_plan(const std::filesystem::path& path);
void save_plan(const std::filesystem::path& path, const TrainPlan& plan);

}  // namespace booster
