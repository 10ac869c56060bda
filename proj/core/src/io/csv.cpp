#include "booster/io/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "booster/errors.hpp"

namespace booster {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_float(float v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

float parse_float(const std::string& text) {
  float v = 0.0f;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw FormatError("malformed number '" + text + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> rows) {
  out << kMetricsHeader << '\n';
  for (const MetricsRecord& r : rows) {
    out << r.split << ',' << r.attack << ',' << to_string(r.signal_mode) << ',' << format_float(r.epsilon) << ','
        << format_float(r.accuracy) << ',' << format_float(r.grad_mean) << ',' << format_float(r.grad_p50) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> rows) {
  auto out = open_out(path);
  write_metrics_csv(out, rows);
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError("metrics.csv: unexpected header");
  std::vector<MetricsRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw FormatError("metrics.csv: expected 7 fields, got " + std::to_string(f.size()));
    MetricsRecord r;
    r.split = f[0];
    r.attack = f[1];
    try {
      r.signal_mode = signal_mode_from_string(f[2]);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("metrics.csv: ") + e.what());
    }
    r.epsilon = parse_float(f[3]);
    r.accuracy = parse_float(f[4]);
    r.grad_mean = parse_float(f[5]);
    r.grad_p50 = parse_float(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return read_metrics_csv(in);
}

void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  auto out = open_out(path);
  out << "a,b,loss\n";
  const std::size_t res = grid.resolution();
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      out << format_float(grid.coords[i]) << ',' << format_float(grid.coords[j]) << ',' << format_float(grid.at(i, j))
          << '\n';
    }
  }
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out << format_float(hist.edges[i]) << ',' << format_float(hist.edges[i + 1]) << ',' << hist.counts[i] << '\n';
  }
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "epsilon,accuracy\n";
  for (const CurvePoint& p : curve) out << format_float(p.epsilon) << ',' << format_float(p.accuracy) << '\n';
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  auto out = open_out(path);
  write_curve_csv(out, curve);
}

}  // namespace booster
