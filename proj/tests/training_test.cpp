#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "booster/analysis/analysis.hpp"
#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/training/training.hpp"
#include "support.hpp"

namespace booster {
namespace {

TrainPlan small_plan() {
  TrainPlan p;
  p.epochs = 1;
  p.batch_size = 64;
  p.subset_size = 128;
  p.signal_iters = 2;
  p.signal_step = 0.05f;
  p.step1_attack = p.step3_attack = p.step4_attack = "fgsm";
  p.eval_examples = 50;
  p.seed = 1;
  return p;
}

/// Naturally trained classifier on a 28x28 canvas with a w=4 signal.
TrainState trained_state() {
  static const TrainState base = [] {
    TrainPlan p = small_plan();
    p.step1_attack = p.step4_attack = "natural";
    p.signal_steps = false;
    p.epochs = 2;
    return run(p, test::mnist_train().head(1000));
  }();
  return base;
}

float mean_ce(const Model& m, const Tensor& canvas, std::span<const int> y) {
  const auto l = per_example_loss(m, canvas, y);
  return std::accumulate(l.begin(), l.end(), 0.0f) / static_cast<float>(l.size());
}

TEST(Subsets, PartitionCoversEveryIndexOnce) {
  Rng rng(1);
  const Partition parts = make_subsets(103, 10, rng);
  ASSERT_EQ(parts.size(), 11u);
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    EXPECT_EQ(parts[i].size(), i + 1 < parts.size() ? 10u : 3u);
    all.insert(all.end(), parts[i].begin(), parts[i].end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Subsets, FullSizeGivesOneSubset) {
  Rng rng(2);
  EXPECT_EQ(make_subsets(50, 50, rng).size(), 1u);
  EXPECT_EQ(make_subsets(50, 500, rng).size(), 1u);
}

TEST(AtLoss, ZeroBudgetMadryIsCleanCe) {
  const TrainState s = trained_state();
  const Dataset d = test::mnist_test().head(64);
  const Tensor canvas = inject(d.images, s.signal);
  Rng rng(3);
  const LossAndGrads r = at_loss_madry(s.model, canvas, d.labels, attack_profile("pgd7", 0.0f), rng);
  EXPECT_NEAR(r.loss, mean_ce(s.model, canvas, d.labels), 1e-5);
  for (const Tensor& g : r.grads) EXPECT_TRUE(g.all_finite());
}

TEST(AtLoss, MadryAboveCleanCe) {
  const TrainState s = trained_state();
  std::size_t above = 0;
  Rng rng(4);
  for (std::size_t b = 0; b < 10; ++b) {
    const Dataset d = test::mnist_test().head(320);
    const std::vector<std::size_t> rows = [b] {
      std::vector<std::size_t> r(32);
      std::iota(r.begin(), r.end(), b * 32);
      return r;
    }();
    const Tensor canvas = inject(d.batch_images(rows), s.signal);
    const auto y = d.batch_labels(rows);
    above += at_loss_madry(s.model, canvas, y, attack_profile("pgd7"), rng).loss >= mean_ce(s.model, canvas, y);
  }
  EXPECT_GE(above, 10u);
}

TEST(AtLoss, TradesLimits) {
  const TrainState s = trained_state();
  const Dataset d = test::mnist_test().head(64);
  const Tensor canvas = inject(d.images, s.signal);
  const float clean = mean_ce(s.model, canvas, d.labels);
  Rng rng(5);
  EXPECT_NEAR(at_loss_trades(s.model, canvas, d.labels, attack_profile("pgd7", 0.0f), 6.0f, rng).loss, clean, 1e-5);
  EXPECT_NEAR(at_loss_trades(s.model, canvas, d.labels, attack_profile("pgd7"), 1e-9f, rng).loss, clean, 1e-5);
  const float full = at_loss_trades(s.model, canvas, d.labels, attack_profile("pgd7"), 6.0f, rng).loss;
  EXPECT_GE(full, clean - 1e-6f);
}

TEST(Steps, Step1LeavesSignalAndReducesLoss) {
  TrainPlan p = small_plan();
  p.step1_attack = "natural";
  p.lr_schedule = "constant";
  TrainState s = init_state(p, Shape{1, 28, 28});
  const BoosterSignal before = s.signal;
  step1_robustify(s, test::mnist_train().head(1000), p);
  EXPECT_EQ(s.signal, before);
  ASSERT_EQ(s.log.size(), 16u);
  const float first = (s.log[0].loss + s.log[1].loss) / 2;
  const float last = (s.log[14].loss + s.log[15].loss) / 2;
  EXPECT_LT(last, first);
}

TEST(Steps, Step4WithNullSignalEqualsStep1) {
  TrainPlan p = small_plan();
  p.signal_init = "zero";
  TrainState a = init_state(p, Shape{1, 28, 28});
  TrainState b = a;
  const Dataset d = test::mnist_train().head(256);
  step1_robustify(a, d, p);
  step4_at_with_signal(b, d, p);
  for (std::size_t i = 0; i < a.model.params().size(); ++i) {
    EXPECT_EQ(a.model.params()[i].value, b.model.params()[i].value);
  }
}

TEST(Steps, Step4LeavesSignalAndReducesLoss) {
  TrainPlan p = small_plan();
  p.step4_attack = "natural";
  p.lr_schedule = "constant";
  TrainState s = init_state(p, Shape{1, 28, 28});
  const BoosterSignal before = s.signal;
  step4_at_with_signal(s, test::mnist_train().head(1000), p);
  EXPECT_EQ(s.signal, before);
  const float first = (s.log[0].loss + s.log[1].loss) / 2;
  const float last = (s.log[14].loss + s.log[15].loss) / 2;
  EXPECT_LT(last, first);
}

TEST(Steps, Step2ZeroStepLeavesSignal) {
  TrainState s = trained_state();
  TrainPlan p = small_plan();
  p.signal_step = 0.0f;
  const BoosterSignal before = s.signal = random_signal(4, 1, 28, 28, s.rng);
  Rng rng(6);
  step2_standard_signal(s, test::mnist_train().head(128), make_subsets(128, 64, rng), p);
  EXPECT_EQ(s.signal, before);
}

TEST(Steps, Step2LowersHeldOutLoss) {
  TrainState s = trained_state();
  s.signal = random_signal(4, 1, 28, 28, s.rng);
  const Dataset train = test::mnist_train().head(1000);
  const Dataset held = test::mnist_test().head(500);
  const float before = mean_ce(s.model, inject(held.images, s.signal), held.labels);
  Rng rng(7);
  TrainPlan p = small_plan();
  p.signal_step = 0.5f;
  step2_standard_signal(s, train, make_subsets(train.size(), 250, rng), p);
  EXPECT_LE(mean_ce(s.model, inject(held.images, s.signal), held.labels), before);
}

TEST(Steps, ZeroWidthSignalIsNoOp) {
  TrainPlan p = small_plan();
  p.signal_width = 0;
  TrainState s = init_state(p, Shape{1, 28, 28});
  EXPECT_FALSE(signal_trainable(s, p));
  Rng rng(8);
  const Dataset d = test::mnist_train().head(128);
  step2_standard_signal(s, d, make_subsets(128, 64, rng), p);
  step3_adversarial_signal(s, d, make_subsets(128, 64, rng), p);
  EXPECT_TRUE(s.log.empty());
}

TEST(Steps, Step3WithZeroBudgetMatchesStep2) {
  TrainState a = trained_state();
  a.signal = random_signal(4, 1, 28, 28, a.rng);
  TrainState b = a;
  TrainPlan p = small_plan();
  p.epsilon = 0.0f;
  p.step3_attack = "pgd7";
  p.signal_step = 0.3f;
  const Dataset d = test::mnist_train().head(256);
  Rng rng(9);
  const Partition parts = make_subsets(256, 128, rng);
  step2_standard_signal(a, d, parts, p);
  step3_adversarial_signal(b, d, parts, p);
  for (std::size_t i = 0; i < a.signal.frame().size(); ++i) {
    ASSERT_NEAR(a.signal.frame()[i], b.signal.frame()[i], 1e-6);
  }
}

TEST(Steps, Step3LowersRobustLoss) {
  TrainState s = trained_state();
  s.signal = random_signal(4, 1, 28, 28, s.rng);
  TrainPlan p = small_plan();
  p.step3_attack = "pgd7";
  p.signal_step = 0.5f;
  p.signal_iters = 3;
  const Dataset d = test::mnist_train().head(512);
  Rng rng(10);
  const Partition parts = make_subsets(512, 128, rng);
  const auto robust_ce = [&](const TrainState& st, const std::vector<std::size_t>& rows) {
    const Tensor canvas = inject(d.batch_images(rows), st.signal);
    const auto y = d.batch_labels(rows);
    Rng attack_rng(11);
    Tensor adv = canvas;
    const Tensor pert = pgd(st.model, canvas, y, attack_profile("pgd7"), attack_rng);
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += pert[i];
    return mean_ce(st.model, adv, y);
  };
  std::size_t improved = 0;
  for (const auto& rows : parts) {
    TrainState one = s;
    const float before = robust_ce(one, rows);
    step3_adversarial_signal(one, d, Partition{rows}, p);
    improved += robust_ce(one, rows) <= before;
  }
  EXPECT_GT(improved, parts.size() / 2);
}

TEST(Step3, PerturbationsRespectBudgetDuringTraining) {
  TrainState s = trained_state();
  const Dataset d = test::mnist_train().head(64);
  const Tensor canvas = inject(d.images, s.signal);
  Rng rng(12);
  const Tensor pert = perturb(s.model, canvas, d.labels, attack_profile("pgd7"), rng);
  for (float v : pert.data()) ASSERT_LE(std::abs(v), 8.0f / 255.0f + 1e-6f);
}

TEST(Run, ZeroEpochsReturnsInitialState) {
  TrainPlan p = small_plan();
  p.epochs = 0;
  const TrainState s = run(p, test::mnist_train().head(64));
  EXPECT_EQ(s.epoch, 0u);
  EXPECT_TRUE(s.log.empty());
  EXPECT_TRUE(s.metrics.empty());
  EXPECT_EQ(s.model.params()[0].value, init_state(p, Shape{1, 28, 28}).model.params()[0].value);
}

TEST(Run, FixedSeedIsBitReproducible) {
  const Dataset d = test::mnist_train().head(256);
  const TrainState a = run(small_plan(), d);
  const TrainState b = run(small_plan(), d);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.signal, b.signal);
}

TEST(Run, EpochVisitsStepsInOrder) {
  std::vector<std::string> seen;
  RunOptions opts;
  opts.observer = [&](std::string_view step, const TrainState&) { seen.emplace_back(step); };
  (void)run(small_plan(), test::mnist_train().head(128), nullptr, opts);
  EXPECT_EQ(seen, (std::vector<std::string>{"step1", "step2", "step3", "step4"}));
}

TEST(Run, NullReductionMatchesPlainAt) {
  const Dataset train = test::mnist_train().head(256);
  const Dataset test = test::mnist_test().head(100);
  TrainPlan p = small_plan();
  p.eval_examples = 100;
  p.signal_width = 0;
  EXPECT_EQ(run(p, train, &test).metrics, train_plain_at(p, train, &test, 0).metrics);
  p.signal_width = 4;
  p.signal_steps = false;
  EXPECT_EQ(run(p, train, &test).metrics, train_plain_at(p, train, &test, 4).metrics);
}

TEST(Run, InvalidPlanRaises) {
  TrainPlan p = small_plan();
  p.subset_size = 0;
  EXPECT_THROW(run(p, test::mnist_train().head(16)), ConfigError);
}

TEST(Sweep, ZeroWidthMatchesBaseline) {
  const Dataset train = test::mnist_train().head(128);
  TrainPlan p = small_plan();
  const std::vector<std::size_t> widths{0};
  const auto points = width_sweep(p, widths, train, nullptr);
  ASSERT_EQ(points.size(), 1u);
  p.signal_width = 0;
  EXPECT_EQ(points[0].final_metrics, run(p, train).metrics.back());
}

TEST(Sweep, OneRecordSetPerValue) {
  const Dataset train = test::mnist_train().head(128);
  const std::vector<std::size_t> widths{0, 2};
  const auto points = width_sweep(small_plan(), widths, train, nullptr);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[1].value, 2u);
  EXPECT_FALSE(points[1].final_metrics.empty());
  const std::vector<std::size_t> dup{4, 4};
  EXPECT_THROW(subset_size_sweep(small_plan(), dup, train, nullptr), ConfigError);
}

}  // namespace
}  // namespace booster
