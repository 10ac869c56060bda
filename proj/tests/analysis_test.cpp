#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "booster/analysis/analysis.hpp"
#include "booster/errors.hpp"
#include "booster/training/training.hpp"
#include "support.hpp"

namespace booster {
namespace {

const TrainState& trained() {
  static const TrainState s = [] {
    TrainPlan p;
    p.epochs = 2;
    p.step1_attack = p.step4_attack = "fgsm";
    p.signal_steps = false;
    p.eval_examples = 10;
    p.seed = 2;
    return run(p, test::mnist_train().head(1000));
  }();
  return s;
}

MetricsRecord eval(const TrainState& s, const Dataset& d, const std::string& attack, float eps = 8.0f / 255.0f) {
  EvalConfig cfg;
  cfg.attack = attack;
  cfg.epsilon = eps;
  return evaluate(s.model, EvalSignals{&s.signal, {}}, d, cfg);
}

TEST(Evaluate, NaturalAtLeastAttacked) {
  const Dataset d = test::mnist_test().head(200);
  const float nat = eval(trained(), d, "natural").accuracy;
  EXPECT_GE(nat, eval(trained(), d, "fgsm").accuracy);
  EXPECT_GE(nat, eval(trained(), d, "pgd20").accuracy);
  EXPECT_GT(nat, 0.8f);
}

TEST(Evaluate, RecordFields) {
  const Dataset d = test::mnist_test().head(50);
  const MetricsRecord r = eval(trained(), d, "natural");
  EXPECT_EQ(r.attack, "natural");
  EXPECT_EQ(r.split, "test");
  EXPECT_EQ(r.epsilon, 0.0f);
  EXPECT_GT(r.grad_mean, 0.0f);
}

TEST(Evaluate, UntrainedModelIsNearChance) {
  const Dataset d = test::mnist_test();
  float mean = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainPlan p;
    p.seed = seed;
    const TrainState s = init_state(p, Shape{1, 28, 28});
    mean += eval(s, d, "natural").accuracy / 5;
  }
  EXPECT_NEAR(mean, 0.10f, 0.03f);
}

TEST(Evaluate, EmptyDatasetRaises) {
  EXPECT_THROW(eval(trained(), test::mnist_test().head(1).subset({}), "natural"), ConfigError);
}

TEST(Evaluate, PoolModeUsesPool) {
  const Dataset d = test::mnist_test().head(40);
  const TrainState& s = trained();
  const std::vector<BoosterSignal> pool{s.signal};
  EvalConfig cfg;
  cfg.mode = SignalMode::Pool;
  const float pooled = evaluate(s.model, EvalSignals{&s.signal, pool}, d, cfg).accuracy;
  EXPECT_EQ(pooled, eval(s, d, "natural").accuracy);
  EXPECT_THROW(evaluate(s.model, EvalSignals{&s.signal, {}}, d, cfg), ConfigError);
}

TEST(Histogram, EveryValueInOneBin) {
  const std::vector<float> v{0.0f, 0.1f, 0.5f, 0.99f, 1.0f, 0.3f};
  const Histogram h = make_histogram(v, 4);
  EXPECT_EQ(h.edges.size(), 5u);
  EXPECT_EQ(h.total(), v.size());
  EXPECT_EQ(h.edges.back(), 1.0f);
  EXPECT_EQ(h.counts.back(), 2u);
}

TEST(GradNorms, ConstantLogitModelIsFlat) {
  TrainState s = trained();
  s.model.params()[s.model.params().size() - 2].value.fill(0.0f);
  const GradNormStats g = input_grad_norm_distribution(s.model, s.signal, test::mnist_test().head(20));
  for (float v : g.interior) EXPECT_LT(v, 1e-6f);
}

TEST(GradNorms, OrderInvariant) {
  const Dataset d = test::mnist_test().head(30);
  std::vector<std::size_t> rev(30);
  for (std::size_t i = 0; i < 30; ++i) rev[i] = 29 - i;
  const GradNormStats a = input_grad_norm_distribution(trained().model, trained().signal, d);
  const GradNormStats b = input_grad_norm_distribution(trained().model, trained().signal, d.subset(rev));
  EXPECT_FLOAT_EQ(a.mean, b.mean);
  EXPECT_FLOAT_EQ(a.median, b.median);
  EXPECT_EQ(a.histogram.counts, b.histogram.counts);
}

TEST(Landscape, CenterIsImageLoss) {
  const Dataset d = test::mnist_test().head(5);
  const TrainState& s = trained();
  const LandscapeGrid grid = loss_landscape(s.model, d, 3, s.signal);
  ASSERT_EQ(grid.loss.size(), 441u);
  for (float v : grid.loss) EXPECT_TRUE(std::isfinite(v));
  const std::vector<std::size_t> row{3};
  const Tensor canvas = inject(d.batch_images(row), s.signal);
  // batched vs single-row GEMM blocking differs in the last bits
  const float single = per_example_loss(s.model, canvas, d.batch_labels(row))[0];
  EXPECT_NEAR(grid.at(10, 10), single, 1e-5f * single);
  EXPECT_FLOAT_EQ(grid.coords.front(), -8.0f / 255.0f);
  EXPECT_EQ(grid.coords[10], 0.0f);
}

TEST(Landscape, DirectionsStayInside) {
  const Dataset d = test::mnist_test().head(2);
  const TrainState& s = trained();
  const LandscapeGrid grid = loss_landscape(s.model, d, 0, s.signal);
  const Tensor border = s.signal.border_mask();
  for (std::size_t i = 0; i < border.size(); ++i) {
    if (border[i] > 0) {
      ASSERT_EQ(grid.direction1[i], 0.0f);
      ASSERT_EQ(grid.direction2[i], 0.0f);
    }
  }
}

TEST(Landscape, EvenResolutionRejected) {
  LandscapeOptions opts;
  opts.resolution = 20;
  EXPECT_THROW(loss_landscape(trained().model, test::mnist_test().head(2), 0, trained().signal, opts), ConfigError);
}

TEST(Curve, StartsAtNaturalAndDecreases) {
  const Dataset d = test::mnist_test().head(200);
  const TrainState& s = trained();
  std::vector<float> eps;
  for (int k = 0; k <= 40; k += 8) eps.push_back(static_cast<float>(k) / 255.0f);
  const auto curve = robustness_curve(s.model, EvalSignals{&s.signal, {}}, SignalMode::Booster, d, eps, "fgsm");
  ASSERT_EQ(curve.size(), eps.size());
  EXPECT_EQ(curve[0].accuracy, eval(s, d, "natural").accuracy);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].accuracy, curve[i - 1].accuracy + 0.02f);
  const std::vector<float> bad{0.1f, 0.05f};
  EXPECT_THROW(robustness_curve(s.model, EvalSignals{&s.signal, {}}, SignalMode::Booster, d, bad), ConfigError);
}

TEST(FindRecord, MissingRowRaises) {
  const std::vector<MetricsRecord> rows{{"test", "natural", SignalMode::Booster, 0, 1, 0, 0}};
  EXPECT_EQ(find_record(rows, "natural", SignalMode::Booster).accuracy, 1.0f);
  EXPECT_THROW(find_record(rows, "pgd20", SignalMode::Booster), ConfigError);
}

TEST(SignalMode, StringRoundTrip) {
  for (SignalMode m : {SignalMode::Null, SignalMode::Booster, SignalMode::Pool}) {
    EXPECT_EQ(signal_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(signal_mode_from_string("frame"), ConfigError);
}

}  // namespace
}  // namespace booster
