#include <gtest/gtest.h>

#include "booster/errors.hpp"
#include "booster/model/model.hpp"
#include "booster/random.hpp"
#include "support.hpp"

namespace booster {
namespace {

TEST(Model, CnnSmallLogitShape) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  const Tensor logits = predict(m, Tensor(Shape{3, 1, 36, 36}, 0.5f));
  EXPECT_EQ(logits.shape(), (Shape{3, 10}));
}

TEST(Model, SameSeedSameParameters) {
  const Model a = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 42);
  const Model b = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 42);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
}

TEST(Model, CanvasSizeOnlyChangesFirstAffineFanIn) {
  const Model small = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 0);
  const Model big = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
  // Parameter counts from an independent layer-by-layer reference model.
  EXPECT_EQ(small.parameter_count(), 27562u);
  EXPECT_EQ(big.parameter_count(), 52138u);
  ASSERT_EQ(small.params().size(), big.params().size());
  for (std::size_t i = 0; i < small.params().size(); ++i) {
    const bool same = small.params()[i].value.shape() == big.params()[i].value.shape();
    EXPECT_EQ(same, small.params()[i].name != "fc1.weight") << small.params()[i].name;
  }
  EXPECT_EQ(small.params()[4].value.shape(), (Shape{64, 400}));
  EXPECT_EQ(big.params()[4].value.shape(), (Shape{64, 784}));
}

TEST(Model, UnknownArchitecture) { EXPECT_THROW(build_cnn("resnet", 10, Shape{1, 28, 28}, 0), ConfigError); }

TEST(Model, InputTooSmall) { EXPECT_THROW(build_cnn("cnn-small", 10, Shape{1, 6, 6}, 0), ShapeError); }

TEST(Model, WrongBatchShape) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 0);
  EXPECT_THROW(predict(m, Tensor(Shape{2, 1, 30, 30})), ShapeError);
}

TEST(Model, DuplicateRowsGiveIdenticalLogits) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  Rng rng(3);
  Tensor one = uniform_tensor(Shape{1, 1, 28, 28}, 0.0f, 1.0f, rng);
  const std::vector<Tensor> parts{one, one};
  const Tensor logits = predict(m, concat_batch(parts));
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(logits[k], logits[10 + k]);
}

TEST(Model, ZeroWeightsGiveBiasLogits) {
  Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  for (auto& p : m.params()) p.value.fill(0.0f);
  auto& bias = m.params().back().value;
  for (std::size_t k = 0; k < 10; ++k) bias[k] = static_cast<float>(k) * 0.5f;
  Rng rng(4);
  const Tensor logits = predict(m, uniform_tensor(Shape{2, 1, 28, 28}, 0.0f, 1.0f, rng));
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(logits[r * 10 + k], static_cast<float>(k) * 0.5f);
  }
}

TEST(InputGradient, ConstantLogitModelIsFlat) {
  Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  m.params().back().value.fill(0.0f);
  m.params()[m.params().size() - 2].value.fill(0.0f);  // fc2.weight
  Rng rng(5);
  const Tensor x = uniform_tensor(Shape{3, 1, 28, 28}, 0.0f, 1.0f, rng);
  const std::vector<int> y{1, 2, 3};
  const Tensor out = input_gradient(m, x, y);
  for (float v : out.data()) EXPECT_LT(std::abs(v), 1e-6f);
}

TEST(InputGradient, ExamplesAreIndependent) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 2);
  Rng rng(6);
  Tensor x = uniform_tensor(Shape{3, 1, 28, 28}, 0.0f, 1.0f, rng);
  const std::vector<int> y{0, 5, 9};
  const Tensor before = input_gradient(m, x, y);
  for (std::size_t i = 0; i < 784; ++i) x[i] = 1.0f - x[i];  // perturb example 0
  const Tensor after = input_gradient(m, x, y);
  for (std::size_t i = 784; i < before.size(); ++i) ASSERT_EQ(before[i], after[i]);
}

TEST(InputGradient, LabelOutOfRange) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 2);
  const std::vector<int> y{10};
  EXPECT_THROW(input_gradient(m, Tensor(Shape{1, 1, 28, 28}), y), ConfigError);
}

}  // namespace
}  // namespace booster
