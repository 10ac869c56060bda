#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/injection/signal.hpp"
#include "booster/random.hpp"

namespace booster {
namespace {

double l2(const Tensor& t) {
  double s = 0;
  for (float v : t.data()) s += double(v) * v;
  return std::sqrt(s);
}

TEST(Inject, ZeroWidthIsIdentity) {
  Rng rng(1);
  const Tensor x = uniform_tensor(Shape{2, 1, 5, 5}, 0.0f, 1.0f, rng);
  EXPECT_EQ(inject(x, null_signal(0, 1, 5, 5)), x);
}

TEST(Inject, NullSignalFramesWithZeros) {
  Rng rng(2);
  const Tensor x = uniform_tensor(Shape{2, 3, 4, 6}, 0.0f, 1.0f, rng);
  const BoosterSignal b = null_signal(2, 3, 4, 6);
  const Tensor canvas = inject(x, b);
  ASSERT_EQ(canvas.shape(), (Shape{2, 3, 8, 10}));
  EXPECT_EQ(center_crop(canvas, 2), x);
  double border = 0;
  const Tensor mask = b.border_mask();
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < mask.size(); ++i) border += mask[i] * std::abs(canvas[n * mask.size() + i]);
  }
  EXPECT_EQ(border, 0.0);
}

TEST(Inject, RandomFrameSurroundsExactCopy) {
  Rng rng(3);
  const BoosterSignal b = random_signal(4, 1, 28, 28, rng);
  const Tensor x = uniform_tensor(Shape{3, 1, 28, 28}, 0.0f, 1.0f, rng);
  const Tensor canvas = inject(x, b);
  EXPECT_EQ(center_crop(canvas, 4), x);
  // Frame pixels come from the signal.
  EXPECT_EQ(canvas[0], b.frame()[0]);
  EXPECT_EQ(canvas[36 * 36 - 1], b.frame()[36 * 36 - 1]);
}

TEST(Inject, GeometryMismatchThrows) {
  EXPECT_THROW(inject(Tensor(Shape{1, 1, 5, 5}), null_signal(1, 1, 6, 6)), ShapeError);
}

TEST(Signal, NullSignalShapeAndNorm) {
  const BoosterSignal b = null_signal(5, 1, 28, 28);
  EXPECT_EQ(b.frame().shape(), (Shape{1, 38, 38}));
  EXPECT_EQ(l2(b.frame()), 0.0);
  EXPECT_EQ(null_signal(0, 1, 28, 28).trainable_size(), 0u);
}

TEST(Signal, MasksPartitionCanvas) {
  const BoosterSignal b = null_signal(2, 3, 5, 4);
  const Tensor border = b.border_mask(), interior = b.interior_mask();
  double inside = 0;
  for (std::size_t i = 0; i < border.size(); ++i) {
    EXPECT_EQ(border[i] + interior[i], 1.0f);
    inside += interior[i];
  }
  EXPECT_EQ(inside, 3.0 * 5 * 4);
  EXPECT_EQ(b.trainable_size(), border.size() - 60);
}

TEST(Signal, SetFrameClipsAndZeroesInterior) {
  BoosterSignal b = null_signal(1, 1, 2, 2);
  b.set_frame(Tensor(b.canvas_shape(), 1.7f));
  EXPECT_TRUE(b.interior_is_zero());
  EXPECT_EQ(b.frame()[0], 1.0f);
}

TEST(SignalStep, ZeroGradientOrEtaLeavesSignal) {
  Rng rng(4);
  const BoosterSignal b = random_signal(3, 1, 6, 6, rng);
  EXPECT_EQ(apply_signal_step(b, Tensor(b.canvas_shape(), 0.0f), 0.5f), b);
  EXPECT_EQ(apply_signal_step(b, Tensor(b.canvas_shape(), 1.0f), 0.0f), b);
}

TEST(SignalStep, ScalarArithmetic) {
  BoosterSignal b = null_signal(1, 1, 3, 3);
  b.set_frame(Tensor(b.canvas_shape(), 0.5f));
  const BoosterSignal next = apply_signal_step(b, b.border_mask(), 0.1f);
  const Tensor mask = b.border_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) EXPECT_FLOAT_EQ(next.frame()[i], mask[i] > 0 ? 0.4f : 0.0f);
}

TEST(SignalStep, ClampsAtZero) {
  BoosterSignal b = null_signal(1, 1, 3, 3);
  b.set_frame(Tensor(b.canvas_shape(), 0.05f));
  const BoosterSignal next = apply_signal_step(b, Tensor(b.canvas_shape(), 1.0f), 0.1f);
  for (float v : next.frame().data()) EXPECT_EQ(v, 0.0f);
}

TEST(SignalStep, InteriorGradientIgnored) {
  BoosterSignal b = null_signal(1, 1, 3, 3);
  const BoosterSignal next = apply_signal_step(b, Tensor(b.canvas_shape(), -5.0f), 1.0f);
  EXPECT_TRUE(next.interior_is_zero());
}

TEST(SignalStep, NonFiniteGradientRaises) {
  const BoosterSignal b = null_signal(1, 1, 3, 3);
  Tensor g(b.canvas_shape(), 0.0f);
  g[0] = std::nanf("");
  EXPECT_THROW(apply_signal_step(b, g, 0.1f), NumericalError);
}

TEST(SignalStepper, ZeroMomentumMatchesPlainStep) {
  Rng rng(5);
  const BoosterSignal b = random_signal(2, 1, 4, 4, rng);
  const Tensor g = normal_tensor(b.canvas_shape(), rng);
  SignalStepper s(0.0f);
  EXPECT_EQ(s.step(b, g, 0.2f), apply_signal_step(b, g, 0.2f));
}

TEST(SignalPool, SingleEntry) {
  Rng rng(6);
  const std::vector<BoosterSignal> pool{random_signal(1, 1, 3, 3, rng)};
  EXPECT_EQ(&random_signal_choice(pool, rng), &pool[0]);
}

TEST(SignalPool, EmptyPoolRaises) {
  Rng rng(6);
  EXPECT_THROW(random_signal_choice({}, rng), ConfigError);
}

TEST(SignalPool, SeededDrawsRepeat) {
  std::vector<BoosterSignal> pool;
  Rng init(7);
  for (int i = 0; i < 10; ++i) pool.push_back(random_signal(1, 1, 2, 2, init));
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(&random_signal_choice(pool, a), &random_signal_choice(pool, b));
}

TEST(SignalPool, UniformFrequencies) {
  std::vector<BoosterSignal> pool(10, null_signal(1, 1, 2, 2));
  Rng rng(8);
  std::map<const BoosterSignal*, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[&random_signal_choice(pool, rng)];
  // Binomial(10000, 0.1): sd = 30.
  ASSERT_EQ(counts.size(), 10u);
  for (const auto& [_, c] : counts) EXPECT_LE(std::abs(c - 1000), 90);
}

TEST(InjectOp, GradientSplitsBetweenImageAndFrame) {
  ad::Graph g;
  const BoosterSignal b = null_signal(1, 1, 2, 2);
  ad::Var x = g.leaf(Tensor(Shape{2, 1, 2, 2}, 0.3f), true);
  ad::Var f = g.leaf(b.frame(), true);
  ad::Var out = ad::sum(ad::inject(x, f, 1));
  g.backward(out);
  for (float v : g.grad(x).data()) EXPECT_EQ(v, 1.0f);
  const Tensor mask = b.border_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) EXPECT_EQ(g.grad(f)[i], 2.0f * mask[i]);
}

}  // namespace
}  // namespace booster
