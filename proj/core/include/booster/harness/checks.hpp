#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace booster::harness {

/// Result a check body hands back. `measured` is compared against `threshold` by the body itself.
struct CheckOutcome {
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct CheckReport {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  double runtime_s = 0.0;
  std::string detail;
};

using CheckFn = std::function<CheckOutcome()>;
using ReportSink = std::function<void(const CheckReport&)>;

/// Ordered set of named checks. Exceptions escaping a body become a failed report.
class CheckRegistry {
 public:
  void add(std::string name, CheckFn fn);
  [[nodiscard]] std::size_t size() const { return checks_.size(); }
  [[nodiscard]] std::vector<std::string> names() const;
  /// Runs every check once, in registration order.
  [[nodiscard]] std::vector<CheckReport> run(const ReportSink& sink = {}) const;

 private:
  std::vector<std::pair<std::string, CheckFn>> checks_;
};

/// Time `fn` and wrap its outcome; a thrown exception fails the check.
CheckReport run_check(const std::string& name, const CheckFn& fn);

bool all_passed(std::span<const CheckReport> reports);
/// "PASS name  measured=... threshold=... (12.3 s)  detail"
std::string report_line(const CheckReport& r);
void print_reports(std::ostream& out, std::span<const CheckReport> reports);

/// name,status,measured,threshold,runtime_s,detail
void write_report_csv(const std::filesystem::path& path, std::span<const CheckReport> reports);

}  // namespace booster::harness
