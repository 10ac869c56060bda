#pragma once

#include <string>
#include <string_view>

namespace booster {

/// Which frame is injected at evaluation time.
enum class SignalMode { Null, Booster, Pool };

std::string_view to_string(SignalMode mode);
/// Accepts "null", "booster", "pool"; ConfigError otherwise.
SignalMode signal_mode_from_string(std::string_view text);

/// One evaluation row; serialized as metrics.csv
/// (split,attack,signal_mode,epsilon,accuracy,grad_mean,grad_p50).
struct MetricsRecord {
  std::string split;
  std::string attack;
  SignalMode signal_mode = SignalMode::Booster;
  float epsilon = 0.0f;
  float accuracy = 0.0f;
  float grad_mean = 0.0f;  // mean interior input-gradient L2 norm
  float grad_p50 = 0.0f;   // median of the same

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

}  // namespace booster
