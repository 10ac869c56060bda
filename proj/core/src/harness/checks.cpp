#include "booster/harness/checks.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "booster/errors.hpp"
#include "booster/io/csv.hpp"

namespace booster::harness {
namespace {

std::string csv_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void CheckRegistry::add(std::string name, CheckFn fn) {
  for (const auto& [n, f] : checks_) {
    if (n == name) throw ConfigError("check '" + name + "' registered twice");
  }
  checks_.emplace_back(std::move(name), std::move(fn));
}

std::vector<std::string> CheckRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, f] : checks_) out.push_back(n);
  return out;
}

std::vector<CheckReport> CheckRegistry::run(const ReportSink& sink) const {
  std::vector<CheckReport> out;
  out.reserve(checks_.size());
  for (const auto& [name, fn] : checks_) {
    out.push_back(run_check(name, fn));
    if (sink) sink(out.back());
  }
  return out;
}

CheckReport run_check(const std::string& name, const CheckFn& fn) {
  CheckReport r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const CheckOutcome o = fn();
    r.passed = o.passed;
    r.measured = o.measured;
    r.threshold = o.threshold;
    r.detail = o.detail;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

bool all_passed(std::span<const CheckReport> reports) {
  for (const auto& r : reports) {
    if (!r.passed) return false;
  }
  return true;
}

std::string report_line(const CheckReport& r) {
  std::string line = (r.passed ? "PASS " : "FAIL ") + r.name + "  measured=" + num(r.measured) +
                     " threshold=" + num(r.threshold) + " (" + num(r.runtime_s) + " s)";
  if (!r.detail.empty()) line += "  " + r.detail;
  return line;
}

void print_reports(std::ostream& out, std::span<const CheckReport> reports) {
  for (const auto& r : reports) out << report_line(r) << '\n';
}

void write_report_csv(const std::filesystem::path& path, std::span<const CheckReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "name,status,measured,threshold,runtime_s,detail\n";
  for (const auto& r : reports) {
    out << csv_field(r.name) << ',' << (r.passed ? "pass" : "fail") << ',' << num(r.measured) << ','
        << num(r.threshold) << ',' << num(r.runtime_s) << ',' << csv_field(r.detail) << '\n';
  }
}

}  // namespace booster::harness
