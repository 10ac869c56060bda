#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "booster/analysis/metrics.hpp"
#include "booster/attacks/attacks.hpp"
#include "booster/autodiff/optim.hpp"
#include "booster/injection/signal.hpp"
#include "booster/io/dataset.hpp"
#include "booster/model/model.hpp"
#include "booster/random.hpp"
#include "booster/training/plan.hpp"

namespace booster {

struct StepLogEntry {
  std::size_t epoch = 0;
  std::string step;   // "step1" .. "step4"
  std::size_t index = 0;  // batch or subset index within the step
  float loss = 0.0f;

  friend bool operator==(const StepLogEntry&, const StepLogEntry&) = default;
};

/// Joint (theta, b) state of the training loop.
struct TrainState {
  Model model;
  BoosterSignal signal;
  std::size_t epoch = 0;  // completed epochs
  Rng rng;
  ad::Sgd optimizer{0.05f};
  SignalStepper signal_stepper;
  std::vector<std::vector<MetricsRecord>> metrics;  // one block per completed epoch
  std::vector<StepLogEntry> log;
};

/// Model built from the plan, signal initialized per plan.signal_init, rng seeded from plan.seed.
TrainState init_state(const TrainPlan& plan, const Shape& image_shape);

struct LossAndGrads {
  float loss = 0.0f;
  std::vector<Tensor> grads;  // aligned with Model::params()
};

/// Madry AT loss: mean CE(f(x + p), y) with p from the given attack on `injected_batch`.
LossAndGrads at_loss_madry(const Model& model, const Tensor& injected_batch, std::span<const int> labels,
                           const AttackSpec& attack, Rng& rng);

/// TRADES loss: mean CE(f(x), y) + beta * mean KL(f(x) || f(x + p)), p from KL-ascent PGD.
LossAndGrads at_loss_trades(const Model& model, const Tensor& injected_batch, std::span<const int> labels,
                            const AttackSpec& attack, float beta, Rng& rng);

/// Random partition of [0, n) into consecutive groups of m (last group may be smaller).
using Partition = std::vector<std::vector<std::size_t>>;
Partition make_subsets(std::size_t n, std::size_t m, Rng& rng);

/// Mean CE over a subset and its gradient with respect to the signal frame.
/// `perturbations`, when given, are added to the injected canvases (B(X, b) + P).
struct SignalGrad {
  float loss = 0.0f;
  Tensor grad;
};
SignalGrad signal_gradient(const Model& model, const Tensor& images, std::span<const int> labels,
                           const BoosterSignal& signal, const Tensor* perturbations = nullptr);

/// Called after every completed step with the step name.
using StepObserver = std::function<void(std::string_view step, const TrainState& state)>;

/// Step 1: one AT pass on B(x, b_null). Updates theta only.
void step1_robustify(TrainState& state, const Dataset& data, const TrainPlan& plan);
/// Step 2: per subset, K plain gradient steps on mean CE(f(B(X, b)), Y). Updates b only.
void step2_standard_signal(TrainState& state, const Dataset& data, const Partition& subsets, const TrainPlan& plan);
/// Step 3: per subset, K rounds of (PGD against B(x_i, b), then b steps on CE(f(B(X, b) + P), Y)).
void step3_adversarial_signal(TrainState& state, const Dataset& data, const Partition& subsets, const TrainPlan& plan);
/// Step 4: one AT pass on B(x, b) with the current signal. Updates theta only.
void step4_at_with_signal(TrainState& state, const Dataset& data, const TrainPlan& plan);

/// Whether steps 2 and 3 have anything to optimize under this plan and signal.
bool signal_trainable(const TrainState& state, const TrainPlan& plan);

/// One epoch: step1 -> step2 -> step3 -> step4, then evaluation rows.
void run_epoch(TrainState& state, const Dataset& train, const Dataset* test, const TrainPlan& plan,
               const StepObserver& observer = {});

/// Evaluation rows appended after every epoch.
std::vector<MetricsRecord> epoch_metrics(const TrainState& state, const Dataset& eval_set, const TrainPlan& plan);

struct RunOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // epoch_NNN/ written after every epoch
  StepObserver observer;
};

/// Full training from a fresh state.
TrainState run(const TrainPlan& plan, const Dataset& train, const Dataset* test = nullptr, const RunOptions& opts = {});
/// Continue `state` until plan.epochs.
void resume(TrainState& state, const TrainPlan& plan, const Dataset& train, const Dataset* test = nullptr,
            const RunOptions& opts = {});

/// Reference adversarial training without any signal machinery: `passes_per_epoch`
/// AT passes per epoch on the images zero-padded by `pad` pixels. Consumes randomness
/// in the same order as run() with frozen b_null, so both yield identical metrics.
TrainState train_plain_at(const TrainPlan& plan, const Dataset& train, const Dataset* test, std::size_t pad,
                          std::size_t passes_per_epoch = 2);

}  // namespace booster
