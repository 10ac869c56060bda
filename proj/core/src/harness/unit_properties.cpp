#include "booster/harness/unit_properties.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "booster/attacks/attacks.hpp"
#include "booster/errors.hpp"
#include "booster/injection/signal.hpp"
#include "booster/io/archive.hpp"
#include "booster/io/csv.hpp"
#include "booster/io/dataset.hpp"
#include "booster/random.hpp"
#include "booster/training/plan.hpp"

namespace booster::harness {
namespace {

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

std::filesystem::path scratch_dir(const UnitOptions& opts) {
  auto dir = opts.scratch.empty() ? std::filesystem::temp_directory_path() / "booster_unit_props" : opts.scratch;
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset random_dataset(std::size_t n, Shape image, Rng& rng) {
  Dataset d;
  Shape s{n, image[0], image[1], image[2]};
  d.images = Tensor(s);
  // Byte-valued pixels so 8-bit formats round-trip exactly.
  for (float& v : d.images.data()) v = static_cast<float>(rng() % 256) / 255.0f;
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng() % 10));
  return d;
}

CheckOutcome projection_invariants() {
  Rng rng(11);
  std::size_t violations = 0, cases = 0;
  double worst = 0.0;
  for (; cases < 500; ++cases) {
    const float eps = std::uniform_real_distribution<float>(0.0f, 0.3f)(rng);
    const Shape s{3, 1, 4, 4};
    const Tensor x = uniform_tensor(s, 0.0f, 1.0f, rng);
    const Tensor p = uniform_tensor(s, -1.0f, 1.0f, rng);
    const Tensor q = project_linf(p, eps, x);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double over = std::abs(q[i]) - eps;
      worst = std::max(worst, over);
      const float v = x[i] + q[i];
      if (over > 1e-6 || v < 0.0f || v > 1.0f) {
        ++violations;
        break;
      }
    }
  }
  return {violations == 0, static_cast<double>(violations), 0.0,
          std::to_string(cases) + " projections, worst |p|-eps " + std::to_string(worst)};
}

CheckOutcome injection_round_trip() {
  Rng rng(12);
  std::size_t failures = 0, cases = 0;
  for (std::size_t w : {0u, 1u, 2u, 4u}) {
    for (std::size_t c : {1u, 3u}) {
      const Shape img{c, 5, 7};
      const BoosterSignal b = random_signal(w, c, 5, 7, rng);
      const Tensor x = uniform_tensor(Shape{4, c, 5, 7}, 0.0f, 1.0f, rng);
      const Tensor canvas = inject(x, b);
      ++cases;
      if (!same_bits(center_crop(canvas, w), x) || !b.interior_is_zero()) ++failures;
      if (b.trainable_size() != c * ((5 + 2 * w) * (7 + 2 * w) - 35)) ++failures;
    }
  }
  return {failures == 0, static_cast<double>(failures), 0.0, std::to_string(cases) + " geometries"};
}

CheckOutcome signal_step_keeps_interior() {
  Rng rng(13);
  BoosterSignal b = random_signal(3, 3, 6, 6, rng);
  SignalStepper stepper(0.9f);
  for (int k = 0; k < 50; ++k) {
    const Tensor g = normal_tensor(b.canvas_shape(), rng);
    b = stepper.step(b, g, 0.5f);
    if (!b.interior_is_zero()) return {false, static_cast<double>(k), 0.0, "interior written"};
    for (float v : b.frame().data()) {
      if (v < 0.0f || v > 1.0f) return {false, static_cast<double>(k), 0.0, "frame left [0,1]"};
    }
  }
  return {true, 0.0, 0.0, "50 momentum steps with 3x3x12x12 frame"};
}

CheckOutcome idx_round_trip(const std::filesystem::path& dir) {
  Rng rng(14);
  const Dataset d = random_dataset(17, Shape{1, 28, 28}, rng);
  save_mnist_idx(d, dir / "t-images", dir / "t-labels");
  const Dataset back = load_mnist_idx(dir / "t-images", dir / "t-labels");
  const bool ok = same_bits(back.images, d.images) && back.labels == d.labels;
  return {ok, ok ? 0.0 : 1.0, 0.0, "17 images"};
}

CheckOutcome cifar_round_trip(const std::filesystem::path& dir) {
  Rng rng(15);
  const Dataset d = random_dataset(9, Shape{3, 32, 32}, rng);
  save_cifar10_bin(d, dir / "batch.bin");
  const Dataset back = load_cifar10_bin(dir / "batch.bin");
  const bool ok = same_bits(back.images, d.images) && back.labels == d.labels;
  return {ok, ok ? 0.0 : 1.0, 0.0, "9 records"};
}

CheckOutcome archive_round_trip(const std::filesystem::path& dir) {
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 5);
  save_model(dir / "m.ckpt", m);
  const Model back = load_model(dir / "m.ckpt");
  bool ok = back.params().size() == m.params().size() && back.arch() == m.arch();
  for (std::size_t i = 0; ok && i < m.params().size(); ++i) ok = same_bits(back.params()[i].value, m.params()[i].value);
  Rng rng(16);
  const BoosterSignal s = random_signal(4, 1, 28, 28, rng);
  save_signal(dir / "s.sig", s);
  ok = ok && load_signal(dir / "s.sig") == s;
  return {ok, ok ? 0.0 : 1.0, 0.0, "model archive and signal file"};
}

CheckOutcome metrics_round_trip() {
  Rng rng(17);
  std::vector<MetricsRecord> rows;
  for (int i = 0; i < 40; ++i) {
    MetricsRecord r;
    r.split = i % 2 ? "test" : "train";
    r.attack = i % 3 ? "pgd20" : "natural";
    r.signal_mode = static_cast<SignalMode>(i % 3);
    r.epsilon = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
    r.accuracy = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
    r.grad_mean = std::uniform_real_distribution<float>(0.0f, 100.0f)(rng);
    r.grad_p50 = std::uniform_real_distribution<float>(0.0f, 1e-5f)(rng);
    rows.push_back(r);
  }
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  const bool ok = read_metrics_csv(ss) == rows;
  return {ok, ok ? 0.0 : 1.0, 0.0, "40 rows"};
}

CheckOutcome plan_round_trip() {
  TrainPlan p;
  p.epochs = 3;
  p.trades_beta = 2.5f;
  p.at_loss = AtLoss::Trades;
  p.signal_step = 0.123456789f;
  p.seed = 987654321987ULL;
  const TrainPlan back = plan_from_json(plan_to_json(p));
  const bool ok = plan_to_json(back) == plan_to_json(p);
  return {ok, ok ? 0.0 : 1.0, 0.0, "json"};
}

CheckOutcome malformed_inputs_rejected(const std::filesystem::path& dir) {
  std::size_t accepted = 0, cases = 0;
  const auto expect_throw = [&](auto&& fn) {
    ++cases;
    try {
      fn();
      ++accepted;
    } catch (const Error&) {
    }
  };
  {
    std::ofstream(dir / "bad-images", std::ios::binary) << "garbage";
    std::ofstream(dir / "bad-labels", std::ios::binary) << "garbage";
  }
  expect_throw([&] { (void)load_mnist_idx(dir / "bad-images", dir / "bad-labels"); });
  {
    std::ofstream(dir / "bad.bin", std::ios::binary) << std::string(3074, '\0');
  }
  expect_throw([&] { (void)load_cifar10_bin(dir / "bad.bin"); });
  {
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << "BSTTNSR";
  }
  expect_throw([&] { (void)load_archive(dir / "bad.ckpt"); });
  expect_throw([&] { (void)plan_from_json("{\"epochs\": -1}"); });
  expect_throw([&] { (void)plan_from_json("{\"no_such_field\": 1}"); });
  return {accepted == 0, static_cast<double>(accepted), 0.0, std::to_string(cases) + " malformed inputs"};
}

void add_gradient_checks(CheckRegistry& reg, const UnitOptions& opts) {
  auto cases = primitive_cases();
  for (const GradCase& c : opts.extra_cases) cases.push_back(c);
  const GradCheckOptions g = opts.grad;
  for (GradCase& c : cases) {
    std::string name = "grad_" + c.name;
    reg.add(std::move(name), [c = std::move(c), g] { return grad_outcome(gradient_check(c, g), g); });
  }
  reg.add("grad_input_end_to_end_cnn_small", [g] {
    const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 0);
    return grad_outcome(input_gradient_check(m, 16, g), g);
  });
  reg.add("grad_input_end_to_end_all_coords", [g] {
    using L = LayerSpec;
    const Model m("probe", {L::conv(4, 3), L::relu(), L::maxpool(2), L::flatten(), L::affine(16), L::relu(), L::affine(10)},
                  Shape{1, 10, 10}, 10);
    return grad_outcome(input_gradient_check(m, 0, g), g);
  });
}

}  // namespace

CheckRegistry gradient_registry(const UnitOptions& opts) {
  CheckRegistry reg;
  add_gradient_checks(reg, opts);
  return reg;
}

CheckRegistry unit_property_registry(const UnitOptions& opts) {
  CheckRegistry reg;
  add_gradient_checks(reg, opts);
  const auto dir = scratch_dir(opts);
  reg.add("projection_budget", projection_invariants);
  reg.add("injection_center_crop", injection_round_trip);
  reg.add("signal_step_interior", signal_step_keeps_interior);
  reg.add("parse_idx_round_trip", [dir] { return idx_round_trip(dir); });
  reg.add("parse_cifar_round_trip", [dir] { return cifar_round_trip(dir); });
  reg.add("parse_archive_round_trip", [dir] { return archive_round_trip(dir); });
  reg.add("parse_metrics_round_trip", metrics_round_trip);
  reg.add("parse_plan_round_trip", plan_round_trip);
  reg.add("parse_rejects_malformed", [dir] { return malformed_inputs_rejected(dir); });
  return reg;
}

std::vector<CheckReport> run_unit_properties(const UnitOptions& opts, const ReportSink& sink) {
  return unit_property_registry(opts).run(sink);
}

}  // namespace booster::harness
