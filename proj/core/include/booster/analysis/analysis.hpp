#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "booster/analysis/metrics.hpp"
#include "booster/injection/signal.hpp"
#include "booster/io/dataset.hpp"
#include "booster/model/model.hpp"
#include "booster/training/plan.hpp"

namespace booster {

/// Frames available to evaluation. `booster` fixes the canvas geometry; `pool` backs SignalMode::Pool.
struct EvalSignals {
  const BoosterSignal* booster = nullptr;
  std::span<const BoosterSignal> pool;
};

struct EvalConfig {
  std::string split = "test";
  std::string attack = "natural";  // any attack profile name
  float epsilon = 8.0f / 255.0f;
  SignalMode mode = SignalMode::Booster;
  std::uint64_t seed = 0;
  bool grad_stats = true;           // fill grad_mean / grad_p50
  bool interior_only_attack = false;  // restrict the perturbation to image pixels
};

/// Accuracy after the configured attack on injected inputs; the attack sees the frame.
/// Empty dataset raises ConfigError.
MetricsRecord evaluate(const Model& model, const EvalSignals& signals, const Dataset& data, const EvalConfig& cfg);

/// Per-example frames for a mode (one frame for Null/Booster, a seeded draw per example for Pool).
std::vector<const BoosterSignal*> frames_for(const EvalSignals& signals, SignalMode mode, std::size_t n,
                                             std::uint64_t seed, BoosterSignal& null_storage);

struct Histogram {
  std::vector<float> edges;  // bins + 1 ascending edges
  std::vector<std::size_t> counts;

  [[nodiscard]] std::size_t total() const;
};

/// Equal-width bins over [0, max(values)]; every value lands in exactly one bin.
Histogram make_histogram(std::span<const float> values, std::size_t bins);

struct GradNormStats {
  std::vector<float> interior;  // per example L2 norm over image pixels
  std::vector<float> frame;     // per example L2 norm over frame pixels
  Histogram histogram;          // of `interior`
  float mean = 0.0f, median = 0.0f;
  float frame_mean = 0.0f, frame_median = 0.0f;
};

/// Input-gradient norms of CE(f(B(x, b)), y) with `signal` injected.
GradNormStats input_grad_norm_distribution(const Model& model, const BoosterSignal& signal, const Dataset& data,
                                           std::size_t bins = 20);

float mean_of(std::span<const float> v);
float median_of(std::vector<float> v);

struct LandscapeOptions {
  float extent = 8.0f / 255.0f;
  std::size_t resolution = 21;  // odd, >= 3
  std::uint64_t seed = 0;
};

struct LandscapeGrid {
  std::size_t center = 0;  // dataset index of the image
  std::vector<float> coords;  // resolution values from -extent to +extent; coords[res/2] == 0
  Tensor direction1;          // Gaussian, interior only, L2 norm sqrt(#interior)
  Tensor direction2;          // sign of the interior input gradient
  std::vector<float> loss;    // row-major [i over direction1][j over direction2]

  [[nodiscard]] std::size_t resolution() const { return coords.size(); }
  [[nodiscard]] float at(std::size_t i, std::size_t j) const { return loss[i * coords.size() + j]; }
  [[nodiscard]] float range() const;
};

/// CE of x + a*d1 + b*d2 around the injected image `index` of `data`.
LandscapeGrid loss_landscape(const Model& model, const Dataset& data, std::size_t index, const BoosterSignal& signal,
                             const LandscapeOptions& opts = {});

struct CurvePoint {
  float epsilon = 0.0f;
  float accuracy = 0.0f;
};

/// One evaluate() per epsilon with the given attack profile. Epsilons must ascend (ConfigError).
std::vector<CurvePoint> robustness_curve(const Model& model, const EvalSignals& signals, SignalMode mode,
                                         const Dataset& data, std::span<const float> epsilons,
                                         const std::string& attack = "pgd20", std::uint64_t seed = 0);

struct SweepPoint {
  std::size_t value = 0;  // width or subset size
  std::vector<MetricsRecord> final_metrics;
};

/// One full run() per width; values must be distinct (ConfigError).
std::vector<SweepPoint> width_sweep(const TrainPlan& base, std::span<const std::size_t> widths, const Dataset& train,
                                    const Dataset* test);
/// One full run() per subset size m.
std::vector<SweepPoint> subset_size_sweep(const TrainPlan& base, std::span<const std::size_t> sizes,
                                          const Dataset& train, const Dataset* test);

/// Row of `rows` matching attack and mode; ConfigError when absent.
const MetricsRecord& find_record(std::span<const MetricsRecord> rows, const std::string& attack, SignalMode mode);

}  // namespace booster
