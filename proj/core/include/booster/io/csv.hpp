#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "booster/analysis/analysis.hpp"
#include "booster/analysis/metrics.hpp"

namespace booster {

inline constexpr const char* kMetricsHeader = "split,attack,signal_mode,epsilon,accuracy,grad_mean,grad_p50";

/// Shortest text that parses back to the same float.
std::string format_float(float v);
/// Strict parse of a whole field; FormatError otherwise.
float parse_float(const std::string& text);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> rows);
/// FormatError on a wrong header, field count, or malformed number.
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// a,b,loss triples, one per grid point.
void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid);
/// bin_lo,bin_hi,count.
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist);
/// epsilon,accuracy.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);
void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve);

/// Split one CSV line on commas (no quoting is ever emitted).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace booster
