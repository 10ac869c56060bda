#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "booster/io/checkpoint.hpp"
#include "booster/training/plan.hpp"
#include "cli.hpp"
#include "support.hpp"

namespace booster {
namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path write_plan(const std::filesystem::path& dir, std::size_t epochs) {
  TrainPlan p;
  p.epochs = epochs;
  p.subset_size = 32;
  p.signal_iters = 1;
  p.step1_attack = p.step3_attack = p.step4_attack = "fgsm";
  p.eval_examples = 20;
  save_plan(dir / "plan.json", p);
  return dir / "plan.json";
}

TEST(Cli, NoSubcommandIsUsageError) {
  const auto r = cli({});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, UnknownFlagPrintsUsage) {
  const auto r = cli({"eval", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli({"--help"}).code, 0); }

TEST(Cli, EvalMissingCheckpointIsDataError) {
  const auto r = cli({"eval", "--ckpt", "/nonexistent/run", "--data", test::data_dir().string()});
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, MissingDatasetIsDataError) {
  const auto dir = test::scratch("cli_nodata");
  const auto r = cli({"train", "--plan", write_plan(dir, 0).string(), "--data", "/nonexistent", "--out",
                      (dir / "run").string()});
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, BadPlanIsConfigError) {
  const auto dir = test::scratch("cli_badplan");
  std::ofstream(dir / "plan.json") << "{\"subset_size\": 0}";
  const auto r = cli({"train", "--plan", (dir / "plan.json").string(), "--data", test::data_dir().string(), "--out",
                      (dir / "run").string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, ZeroEpochTrainWritesInitialCheckpoint) {
  const auto dir = test::scratch("cli_epoch0");
  const auto r = cli({"train", "--plan", write_plan(dir, 0).string(), "--data", test::data_dir().string(),
                      "--train-examples", "64", "--test-examples", "20", "--out", (dir / "run").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(epoch_dir(dir / "run", 0) / "state.json"));
  EXPECT_EQ(load_checkpoint(epoch_dir(dir / "run", 0)).state.epoch, 0u);
}

TEST(Cli, TrainEvalAnalyze) {
  const auto dir = test::scratch("cli_flow");
  const std::string data = test::data_dir().string();
  const std::string run = (dir / "run").string();
  ASSERT_EQ(cli({"train", "--plan", write_plan(dir, 1).string(), "--data", data, "--train-examples", "64",
                 "--test-examples", "20", "--out", run})
                .code,
            0);

  const auto ev = cli({"eval", "--ckpt", run, "--data", data, "--test-examples", "20", "--attack", "fgsm",
                       "--signal", "null"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("test,fgsm,null,"), std::string::npos);

  const auto curve = cli({"analyze", "--ckpt", run, "--data", data, "--test-examples", "20", "--mode", "curve",
                          "--attack", "fgsm", "--epsilons", "0,0.01,0.02"});
  ASSERT_EQ(curve.code, 0) << curve.err;
  std::istringstream lines(curve.out);
  std::string line;
  std::size_t rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line, "epsilon,accuracy");
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 3u);

  const auto land = cli({"analyze", "--ckpt", run, "--data", data, "--test-examples", "5", "--mode", "landscape",
                         "--resolution", "5", "--out", (dir / "land.csv").string()});
  ASSERT_EQ(land.code, 0) << land.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "land.csv"));

  const auto pool = cli({"eval", "--ckpt", run, "--data", data, "--signal", "pool"});
  EXPECT_EQ(pool.code, 2);
}

TEST(Cli, BadChoiceIsConfigError) {
  const auto r = cli({"analyze", "--ckpt", "x", "--data", "y", "--mode", "spectrum"});
  EXPECT_EQ(r.code, 2);
}

}  // namespace
}  // namespace booster
