#include "booster/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "booster/attacks/attacks.hpp"
#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/random.hpp"
#include "booster/training/training.hpp"

namespace booster {
namespace {

constexpr std::size_t kChunk = 64;

Tensor injected_chunk(const Dataset& data, std::size_t b, std::size_t e,
                      const std::vector<const BoosterSignal*>& frames) {
  const Tensor x = data.images.slice_batch(b, e);
  // Single shared frame: one call covers the chunk.
  bool shared = true;
  for (std::size_t i = b + 1; i < e; ++i) shared = shared && frames[i] == frames[b];
  if (shared) return inject(x, *frames[b]);
  std::vector<Tensor> parts;
  parts.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) parts.push_back(inject(x.slice_batch(i - b, i - b + 1), *frames[i]));
  return concat_batch(parts);
}

// L2 norm of each example's gradient restricted to mask == 1 coordinates.
void masked_norms(const Tensor& grads, const Tensor& mask, std::vector<float>& out) {
  const std::size_t n = grads.shape()[0], row = grads.row_size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const float* g = grads.ptr() + i * row;
    for (std::size_t k = 0; k < row; ++k) {
      if (mask[k] != 0.0f) s += static_cast<double>(g[k]) * g[k];
    }
    out.push_back(static_cast<float>(std::sqrt(s)));
  }
}

}  // namespace

std::string_view to_string(SignalMode mode) {
  switch (mode) {
    case SignalMode::Null:
      return "null";
    case SignalMode::Booster:
      return "booster";
    case SignalMode::Pool:
      return "pool";
  }
  return "null";
}

SignalMode signal_mode_from_string(std::string_view text) {
  if (text == "null") return SignalMode::Null;
  if (text == "booster") return SignalMode::Booster;
  if (text == "pool") return SignalMode::Pool;
  throw ConfigError("unknown signal mode '" + std::string(text) + "' (expected null, booster or pool)");
}

std::vector<const BoosterSignal*> frames_for(const EvalSignals& signals, SignalMode mode, std::size_t n,
                                             std::uint64_t seed, BoosterSignal& null_storage) {
  const BoosterSignal* geometry = signals.booster != nullptr ? signals.booster
                                  : signals.pool.empty()     ? nullptr
                                                             : &signals.pool.front();
  if (geometry == nullptr) throw ConfigError("evaluation needs a booster signal or a pool for the canvas geometry");
  switch (mode) {
    case SignalMode::Null:
      null_storage = null_signal(geometry->width(), geometry->channels(), geometry->image_height(),
                                 geometry->image_width());
      return std::vector<const BoosterSignal*>(n, &null_storage);
    case SignalMode::Booster:
      if (signals.booster == nullptr) throw ConfigError("booster mode without a booster signal");
      return std::vector<const BoosterSignal*>(n, signals.booster);
    case SignalMode::Pool: {
      Rng rng(seed);
      std::vector<const BoosterSignal*> out;
      out.reserve(n);
      for (std::size_t i = 0; i < n; ++i) out.push_back(&random_signal_choice(signals.pool, rng));
      return out;
    }
  }
  return {};
}

MetricsRecord evaluate(const Model& model, const EvalSignals& signals, const Dataset& data, const EvalConfig& cfg) {
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("evaluate: empty dataset");
  const AttackSpec spec = attack_profile(cfg.attack, cfg.epsilon);
  BoosterSignal null_storage;
  const auto frames = frames_for(signals, cfg.mode, n, cfg.seed, null_storage);
  const Tensor interior = frames.front()->interior_mask();
  AttackOptions opts;
  if (cfg.interior_only_attack) opts.region = &interior;

  Rng rng(cfg.seed);
  std::size_t correct = 0;
  std::vector<float> norms;
  norms.reserve(n);
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    const Tensor canvas = injected_chunk(data, b, e, frames);
    const std::span<const int> y(data.labels.data() + b, e - b);
    Tensor adv = canvas;
    if (spec.family != AttackFamily::None) {
      const Tensor p = perturb(model, canvas, y, spec, rng, opts);
      for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += p[i];
    }
    const auto pred = argmax_rows(predict(model, adv));
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y[i] ? 1 : 0;
    if (cfg.grad_stats) masked_norms(input_gradient(model, canvas, y), interior, norms);
  }

  MetricsRecord r;
  r.split = cfg.split;
  r.attack = cfg.attack;
  r.signal_mode = cfg.mode;
  r.epsilon = spec.family == AttackFamily::None ? 0.0f : cfg.epsilon;
  r.accuracy = static_cast<float>(static_cast<double>(correct) / static_cast<double>(n));
  if (cfg.grad_stats) {
    r.grad_mean = mean_of(norms);
    r.grad_p50 = median_of(norms);
  }
  return r;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram make_histogram(std::span<const float> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  float hi = 0.0f;
  for (float v : values) hi = std::max(hi, v);
  if (hi <= 0.0f) hi = 1.0f;
  Histogram h;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = hi * static_cast<float>(i) / static_cast<float>(bins);
  h.edges.back() = hi;
  for (float v : values) {
    auto k = static_cast<std::size_t>(std::max(0.0f, v) / hi * static_cast<float>(bins));
    h.counts[std::min(k, bins - 1)]++;
  }
  return h;
}

float mean_of(std::span<const float> v) {
  if (v.empty()) return 0.0f;
  double s = 0.0;
  for (float x : v) s += x;
  return static_cast<float>(s / static_cast<double>(v.size()));
}

float median_of(std::vector<float> v) {
  if (v.empty()) return 0.0f;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2 == 1) return v[m];
  return static_cast<float>((static_cast<double>(v[m - 1]) + v[m]) / 2.0);
}

GradNormStats input_grad_norm_distribution(const Model& model, const BoosterSignal& signal, const Dataset& data,
                                           std::size_t bins) {
  GradNormStats s;
  const Tensor interior = signal.interior_mask();
  const Tensor border = signal.border_mask();
  for (std::size_t b = 0; b < data.size(); b += kChunk) {
    const std::size_t e = std::min(data.size(), b + kChunk);
    const Tensor canvas = inject(data.images.slice_batch(b, e), signal);
    const Tensor g = input_gradient(model, canvas, std::span<const int>(data.labels.data() + b, e - b));
    masked_norms(g, interior, s.interior);
    masked_norms(g, border, s.frame);
  }
  s.histogram = make_histogram(s.interior, bins);
  s.mean = mean_of(s.interior);
  s.median = median_of(s.interior);
  s.frame_mean = mean_of(s.frame);
  s.frame_median = median_of(s.frame);
  return s;
}

float LandscapeGrid::range() const {
  if (loss.empty()) return 0.0f;
  const auto [lo, hi] = std::minmax_element(loss.begin(), loss.end());
  return *hi - *lo;
}

LandscapeGrid loss_landscape(const Model& model, const Dataset& data, std::size_t index, const BoosterSignal& signal,
                             const LandscapeOptions& opts) {
  if (opts.resolution < 3 || opts.resolution % 2 == 0) {
    throw ConfigError("landscape resolution must be odd and >= 3");
  }
  if (index >= data.size()) throw ConfigError("landscape image index out of range");
  const Tensor canvas = inject(data.images.slice_batch(index, index + 1), signal);
  const std::vector<int> y{data.labels[index]};
  const Tensor mask = signal.interior_mask();

  LandscapeGrid grid;
  grid.center = index;
  const std::size_t res = opts.resolution, half = res / 2;
  grid.coords.resize(res);
  for (std::size_t i = 0; i < res; ++i) {
    grid.coords[i] = opts.extent * (static_cast<float>(i) - static_cast<float>(half)) / static_cast<float>(half);
  }
  grid.coords[half] = 0.0f;

  Rng rng(opts.seed);
  Tensor d1 = normal_tensor(canvas.shape(), rng);
  double sq = 0.0, count = 0.0;
  for (std::size_t k = 0; k < d1.size(); ++k) {
    d1[k] *= mask[k];
    sq += static_cast<double>(d1[k]) * d1[k];
    count += mask[k];
  }
  const auto scale_d1 = static_cast<float>(std::sqrt(count / std::max(sq, 1e-30)));
  for (float& v : d1.data()) v *= scale_d1;

  const Tensor g = input_gradient(model, canvas, y);
  Tensor d2(canvas.shape());
  for (std::size_t k = 0; k < d2.size(); ++k) {
    d2[k] = mask[k] * static_cast<float>((g[k] > 0.0f) - (g[k] < 0.0f));
  }

  // All res*res points evaluated as one batch.
  Tensor batch(Shape{res * res, canvas.shape()[1], canvas.shape()[2], canvas.shape()[3]});
  const std::size_t row = canvas.size();
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      float* dst = batch.ptr() + (i * res + j) * row;
      const float a = grid.coords[i], bb = grid.coords[j];
      for (std::size_t k = 0; k < row; ++k) dst[k] = canvas[k] + a * d1[k] + bb * d2[k];
    }
  }
  const std::vector<int> labels(res * res, y[0]);
  grid.loss = per_example_loss(model, batch, labels);
  grid.direction1 = std::move(d1);
  grid.direction2 = std::move(d2);
  return grid;
}

std::vector<CurvePoint> robustness_curve(const Model& model, const EvalSignals& signals, SignalMode mode,
                                         const Dataset& data, std::span<const float> epsilons,
                                         const std::string& attack, std::uint64_t seed) {
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) throw ConfigError("curve epsilons must ascend");
  std::vector<CurvePoint> out;
  for (float eps : epsilons) {
    EvalConfig cfg;
    cfg.attack = eps == 0.0f ? "natural" : attack;
    cfg.epsilon = eps;
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.grad_stats = false;
    out.push_back({eps, evaluate(model, signals, data, cfg).accuracy});
  }
  return out;
}

namespace {

template <typename Apply>
std::vector<SweepPoint> sweep(const TrainPlan& base, std::span<const std::size_t> values, const Dataset& train,
                              const Dataset* test, Apply apply) {
  if (std::set<std::size_t>(values.begin(), values.end()).size() != values.size()) {
    throw ConfigError("sweep values must be distinct");
  }
  std::vector<SweepPoint> out;
  for (std::size_t v : values) {
    TrainPlan plan = base;
    apply(plan, v);
    const TrainState s = run(plan, train, test);
    out.push_back({v, s.metrics.empty() ? std::vector<MetricsRecord>{} : s.metrics.back()});
  }
  return out;
}

}  // namespace

std::vector<SweepPoint> width_sweep(const TrainPlan& base, std::span<const std::size_t> widths, const Dataset& train,
                                    const Dataset* test) {
  return sweep(base, widths, train, test, [](TrainPlan& p, std::size_t v) { p.signal_width = v; });
}

std::vector<SweepPoint> subset_size_sweep(const TrainPlan& base, std::span<const std::size_t> sizes,
                                          const Dataset& train, const Dataset* test) {
  return sweep(base, sizes, train, test, [](TrainPlan& p, std::size_t v) { p.subset_size = v; });
}

const MetricsRecord& find_record(std::span<const MetricsRecord> rows, const std::string& attack, SignalMode mode) {
  for (const MetricsRecord& r : rows) {
    if (r.attack == attack && r.signal_mode == mode) return r;
  }
  throw ConfigError("no metrics row for attack '" + attack + "' in mode " + std::string(to_string(mode)));
}

}  // namespace booster
