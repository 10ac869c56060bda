#include <gtest/gtest.h>

#include <cmath>

#include "booster/attacks/attacks.hpp"
#include "booster/errors.hpp"
#include "booster/training/training.hpp"
#include "support.hpp"

namespace booster {
namespace {

constexpr float kEps = 8.0f / 255.0f;

/// Small naturally trained classifier shared by the empirical checks.
const TrainState& trained() {
  static const TrainState s = [] {
    TrainPlan p;
    p.epochs = 2;
    p.step1_attack = p.step3_attack = p.step4_attack = "natural";
    p.eval_examples = 10;
    p.seed = 3;
    return train_plain_at(p, test::mnist_train().head(1000), nullptr, 0);
  }();
  return s;
}

Tensor added(const Tensor& x, const Tensor& p) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  return out;
}

TEST(Project, WithinBudgetUnchanged) {
  // dyadic values keep (x + p) - x exact
  const Tensor x(Shape{1, 1, 1, 3}, 0.25f);
  const Tensor p(Shape{1, 1, 1, 3}, {0.0625f, -0.09375f, 0.0f});
  EXPECT_EQ(project_linf(p, 0.1f, x), p);
}

TEST(Project, ClipsToBudget) {
  const Tensor x(Shape{1, 1, 2, 2}, 0.5f);
  const Tensor out = project_linf(Tensor(x.shape(), 1.0f), 0.1f, x);
  for (float v : out.data()) EXPECT_FLOAT_EQ(v, 0.1f);
}

TEST(Project, ClipsToPixelRange) {
  const Tensor x(Shape{1, 1, 1, 1}, 1.0f);
  EXPECT_EQ(project_linf(Tensor(x.shape(), 0.05f), 0.05f, x)[0], 0.0f);
  EXPECT_EQ(project_linf(Tensor(x.shape(), 0.05f), 0.2f, x)[0], 0.0f);
}

TEST(Profiles, StepSizes) {
  EXPECT_FLOAT_EQ(attack_profile("pgd7", kEps).step_size, kEps / 4);
  EXPECT_EQ(attack_profile("pgd7", kEps).steps, 7u);
  EXPECT_FLOAT_EQ(attack_profile("pgd20", kEps).step_size, kEps / 10);
  EXPECT_EQ(attack_profile("pgd20", kEps).steps, 20u);
  EXPECT_EQ(attack_profile("natural").family, AttackFamily::None);
  EXPECT_EQ(attack_profile("cw200").cw_iters, 200u);
  EXPECT_THROW(attack_profile("pgd9"), ConfigError);
}

TEST(Profiles, Validation) {
  AttackSpec s;
  s.epsilon = -0.1f;
  EXPECT_THROW(s.validate(), ConfigError);
  s = AttackSpec{};
  s.steps = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Fgsm, ZeroGradientGivesZeroPerturbation) {
  Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  for (auto& p : m.params()) p.value.fill(0.0f);
  const Dataset d = test::random_images(4, Shape{1, 28, 28}, 1);
  const Tensor out = fgsm(m, d.images, d.labels, kEps);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Fgsm, RaisesLossOnTrainedModel) {
  const Dataset d = test::mnist_test().head(200);
  const Model& m = trained().model;
  const auto clean = attack_loss(m, d.images, d.labels, AttackObjective::CrossEntropy);
  const auto adv = attack_loss(m, added(d.images, fgsm(m, d.images, d.labels, kEps)), d.labels,
                               AttackObjective::CrossEntropy);
  std::size_t up = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) up += adv[i] >= clean[i];
  EXPECT_GE(up, 180u);
}

TEST(Pgd, ZeroBudgetGivesZero) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  const Dataset d = test::random_images(3, Shape{1, 28, 28}, 2);
  AttackSpec spec = attack_profile("pgd20", 0.0f);
  Rng rng(1);
  const Tensor out = pgd(m, d.images, d.labels, spec, rng);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Pgd, RespectsBudgetAndBox) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 4);
  const Dataset d = test::random_images(8, Shape{1, 28, 28}, 3);
  Rng rng(2);
  for (AttackObjective obj : {AttackObjective::CrossEntropy, AttackObjective::KlToClean}) {
    AttackOptions opts;
    opts.objective = obj;
    const Tensor p = pgd(m, d.images, d.labels, attack_profile("pgd7", 0.1f), rng, opts);
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_LE(std::abs(p[i]), 0.1f + 1e-6f);
      ASSERT_GE(d.images[i] + p[i], 0.0f);
      ASSERT_LE(d.images[i] + p[i], 1.0f);
    }
  }
}

TEST(Pgd, RegionMaskConfinesPerturbation) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 4);
  const Dataset d = test::random_images(2, Shape{1, 28, 28}, 5);
  Tensor region(Shape{1, 28, 28}, 0.0f);
  for (std::size_t i = 0; i < 100; ++i) region[i] = 1.0f;
  AttackOptions opts;
  opts.region = &region;
  Rng rng(3);
  const Tensor p = pgd(m, d.images, d.labels, attack_profile("pgd7", 0.1f), rng, opts);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 100; i < 784; ++i) ASSERT_EQ(p[n * 784 + i], 0.0f);
  }
}

TEST(Pgd, StrongerThanFgsmOnTrainedModel) {
  const Dataset d = test::mnist_test().head(200);
  const Model& m = trained().model;
  Rng rng(4);
  const auto lf = attack_loss(m, added(d.images, fgsm(m, d.images, d.labels, kEps)), d.labels,
                              AttackObjective::CrossEntropy);
  const auto lp = attack_loss(m, added(d.images, pgd(m, d.images, d.labels, attack_profile("pgd20", kEps), rng)),
                              d.labels, AttackObjective::CrossEntropy);
  std::size_t stronger = 0;
  for (std::size_t i = 0; i < lf.size(); ++i) stronger += lp[i] >= lf[i];
  EXPECT_GE(stronger, 160u);
}

Model linear_toy() {
  // logits = W x + b with W = [[6, -8], [0, 0]], b = [0, 1]
  Model m("linear", {LayerSpec::affine(2)}, Shape{1, 1, 2}, 2);
  m.params()[0].value = Tensor(Shape{2, 2}, {6, -8, 0, 0});
  m.params()[1].value = Tensor(Shape{2}, {0, 1});
  return m;
}

TEST(CarliniWagner, ZeroConstantStaysPut) {
  const Model m = linear_toy();
  const Tensor x(Shape{1, 1, 1, 2}, {0.7f, 0.3f});
  const std::vector<int> y{0};
  AttackSpec spec = attack_profile("cw200");
  spec.cw_c = 0.0f;
  const Tensor p = cw_l2(m, x, y, spec);
  EXPECT_LT(std::hypot(p[0], p[1]), 1e-3);
}

TEST(CarliniWagner, FindsLinearBoundary) {
  // Distance from x to {(w0 - w1) . x + b0 - b1 = 0} is 0.8 / 10 = 0.08.
  const Model m = linear_toy();
  const Tensor x(Shape{1, 1, 1, 2}, {0.7f, 0.3f});
  const std::vector<int> y{0};
  AttackSpec spec = attack_profile("cw200");
  spec.cw_c = 10.0f;
  spec.cw_iters = 1000;
  const Tensor p = cw_l2(m, x, y, spec);
  EXPECT_NEAR(std::hypot(p[0], p[1]), 0.08, 0.08 * 0.05);
}

TEST(Perturb, NaturalIsZero) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 28, 28}, 1);
  const Dataset d = test::random_images(2, Shape{1, 28, 28}, 6);
  Rng rng(5);
  const Tensor out = perturb(m, d.images, d.labels, attack_profile("natural"), rng);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

}  // namespace
}  // namespace booster
