#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "booster/errors.hpp"
#include "booster/harness/checks.hpp"
#include "booster/harness/unit_properties.hpp"
#include "support.hpp"

namespace booster::harness {
namespace {

/// x^2 recorded with the derivative 3x instead of 2x.
GradCase corrupted_square() {
  GradCase c;
  c.name = "corrupted_square";
  c.shapes = {Shape{5}};
  c.build = [](std::span<const ad::Var> v) {
    const ad::Var x = v[0];
    Tensor out = x.value();
    for (float& e : out.data()) e *= e;
    return x.graph->record("bad_square", std::move(out), {x}, [](const ad::BackwardContext& ctx) {
      Tensor* d = ctx.input_grad(0);
      if (d == nullptr) return;
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += 3.0f * ctx.input(0)[i] * ctx.out_grad()[i];
    });
  };
  c.reference = [](std::span<const reference::Vec> in) {
    reference::Vec out = in[0];
    for (double& e : out) e *= e;
    return out;
  };
  return c;
}

TEST(UnitProperties, FreshBuildPasses) {
  const auto reports = run_unit_properties();
  for (const CheckReport& r : reports) EXPECT_TRUE(r.passed) << report_line(r);
}

TEST(UnitProperties, CorruptedBackwardIsCaught) {
  UnitOptions opts;
  opts.extra_cases.push_back(corrupted_square());
  const auto reports = gradient_registry(opts).run();
  bool found = false;
  for (const CheckReport& r : reports) {
    if (r.name == "grad_corrupted_square") {
      found = true;
      EXPECT_FALSE(r.passed);
      EXPECT_GT(r.measured, 0.1);
    } else {
      EXPECT_TRUE(r.passed) << r.name;
    }
  }
  EXPECT_TRUE(found);
}

TEST(UnitProperties, OneRowPerRegisteredCheck) {
  const CheckRegistry reg = unit_property_registry();
  const auto names = reg.names();
  const auto reports = reg.run();
  ASSERT_EQ(reports.size(), reg.size());
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  for (std::size_t i = 0; i < reports.size(); ++i) EXPECT_EQ(reports[i].name, names[i]);
}

TEST(Registry, DuplicateNameRejected) {
  CheckRegistry reg;
  reg.add("a", [] { return CheckOutcome{true, 0.0, 0.0, ""}; });
  EXPECT_THROW(reg.add("a", [] { return CheckOutcome{true, 0.0, 0.0, ""}; }), ConfigError);
}

TEST(Registry, ExceptionBecomesFailure) {
  CheckRegistry reg;
  reg.add("boom", []() -> CheckOutcome { throw DataError("no data"); });
  const auto reports = reg.run();
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_FALSE(reports[0].passed);
  EXPECT_NE(reports[0].detail.find("no data"), std::string::npos);
  EXPECT_FALSE(all_passed(reports));
}

TEST(Registry, ReportCsv) {
  CheckRegistry reg;
  reg.add("ok", [] { return CheckOutcome{true, 0.5, 1.0, "fine"}; });
  reg.add("bad", [] { return CheckOutcome{false, 2.0, 1.0, "with, comma"}; });
  const auto reports = reg.run();
  const auto dir = test::scratch("report_csv");
  write_report_csv(dir / "report.csv", reports);
  std::ifstream in(dir / "report.csv");
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "name,status,measured,threshold,runtime_s,detail");
  EXPECT_EQ(first.rfind("ok,pass,", 0), 0u);
  EXPECT_EQ(second.rfind("bad,fail,", 0), 0u);
  EXPECT_EQ(report_line(reports[0]).rfind("PASS ok", 0), 0u);
}

}  // namespace
}  // namespace booster::harness
