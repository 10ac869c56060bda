#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "booster/errors.hpp"
#include "booster/io/archive.hpp"
#include "booster/io/checkpoint.hpp"
#include "booster/io/csv.hpp"
#include "booster/io/dataset.hpp"
#include "booster/training/training.hpp"
#include "support.hpp"

namespace booster {
namespace {

namespace fs = std::filesystem;

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<unsigned char>(x >> s));
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols, unsigned char fill) {
  std::vector<unsigned char> v;
  put_be32(v, 0x00000803);
  put_be32(v, n);
  put_be32(v, rows);
  put_be32(v, cols);
  v.insert(v.end(), static_cast<std::size_t>(n) * rows * cols, fill);
  return v;
}

std::vector<unsigned char> idx_labels(std::uint32_t n, unsigned char label) {
  std::vector<unsigned char> v;
  put_be32(v, 0x00000801);
  put_be32(v, n);
  v.insert(v.end(), n, label);
  return v;
}

TEST(Idx, ShippedFilesDecode) {
  const Dataset& d = test::mnist_train();
  EXPECT_EQ(d.image_shape(), (Shape{1, 28, 28}));
  EXPECT_EQ(d.size(), 9000u);
  EXPECT_EQ(test::mnist_test().size(), 1000u);
  d.validate();
}

TEST(Idx, ScalesBytes) {
  const auto dir = test::scratch("idx_scale");
  write_bytes(dir / "i", idx_images(2, 3, 3, 51));
  write_bytes(dir / "l", idx_labels(2, 7));
  const Dataset d = load_mnist_idx(dir / "i", dir / "l");
  EXPECT_EQ(d.images.shape(), (Shape{2, 1, 3, 3}));
  EXPECT_FLOAT_EQ(d.images[0], 0.2f);
  EXPECT_EQ(d.labels, (std::vector<int>{7, 7}));
}

TEST(Idx, BadMagic) {
  const auto dir = test::scratch("idx_magic");
  auto img = idx_images(1, 2, 2, 0);
  img[3] = 0x04;
  write_bytes(dir / "i", img);
  write_bytes(dir / "l", idx_labels(1, 0));
  EXPECT_THROW(load_mnist_idx(dir / "i", dir / "l"), FormatError);
}

TEST(Idx, Truncated) {
  const auto dir = test::scratch("idx_trunc");
  auto img = idx_images(2, 2, 2, 0);
  img.pop_back();
  write_bytes(dir / "i", img);
  write_bytes(dir / "l", idx_labels(2, 0));
  EXPECT_THROW(load_mnist_idx(dir / "i", dir / "l"), FormatError);
}

TEST(Idx, CountMismatch) {
  const auto dir = test::scratch("idx_count");
  write_bytes(dir / "i", idx_images(3, 2, 2, 0));
  write_bytes(dir / "l", idx_labels(2, 0));
  EXPECT_THROW(load_mnist_idx(dir / "i", dir / "l"), FormatError);
}

TEST(Idx, RoundTrip) {
  const auto dir = test::scratch("idx_rt");
  const Dataset d = test::mnist_test().head(50);
  save_mnist_idx(d, dir / "i", dir / "l");
  const Dataset back = load_mnist_idx(dir / "i", dir / "l");
  EXPECT_EQ(back.images, d.images);
  EXPECT_EQ(back.labels, d.labels);
}

TEST(Idx, MissingDirectoryIsDataError) { EXPECT_THROW(load_dataset_dir("/nonexistent/dir", "train"), DataError); }

std::vector<unsigned char> cifar_record(unsigned char label) {
  std::vector<unsigned char> r{label};
  for (unsigned char plane : {10, 20, 30}) r.insert(r.end(), 1024, plane);
  return r;
}

TEST(Cifar, PlanarPixelOrder) {
  const auto dir = test::scratch("cifar_order");
  auto bytes = cifar_record(3);
  const auto second = cifar_record(9);
  bytes.insert(bytes.end(), second.begin(), second.end());
  write_bytes(dir / "b.bin", bytes);
  const Dataset d = load_cifar10_bin(dir / "b.bin");
  ASSERT_EQ(d.images.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 9}));
  EXPECT_FLOAT_EQ(d.images[0], 10.0f / 255.0f);
  EXPECT_FLOAT_EQ(d.images[1024], 20.0f / 255.0f);
  EXPECT_FLOAT_EQ(d.images[2048], 30.0f / 255.0f);
}

TEST(Cifar, LabelOutOfRange) {
  const auto dir = test::scratch("cifar_label");
  write_bytes(dir / "b.bin", cifar_record(255));
  EXPECT_THROW(load_cifar10_bin(dir / "b.bin"), FormatError);
}

TEST(Cifar, LengthNotMultiple) {
  const auto dir = test::scratch("cifar_len");
  auto bytes = cifar_record(1);
  bytes.push_back(0);
  write_bytes(dir / "b.bin", bytes);
  EXPECT_THROW(load_cifar10_bin(dir / "b.bin"), FormatError);
}

TEST(Archive, ModelRoundTripPredictsIdentically) {
  const auto dir = test::scratch("archive_model");
  const Model m = build_cnn("cnn-small", 10, Shape{1, 36, 36}, 9);
  save_model(dir / "m.ckpt", m);
  const Model back = load_model(dir / "m.ckpt");
  const Dataset d = test::random_images(4, Shape{1, 36, 36}, 1);
  EXPECT_EQ(predict(back, d.images), predict(m, d.images));
}

TEST(Archive, FlippedByteIsCorruption) {
  const auto dir = test::scratch("archive_flip");
  save_model(dir / "m.ckpt", build_cnn("cnn-small", 10, Shape{1, 28, 28}, 9));
  std::fstream f(dir / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(200);
  f.put('\x7f');
  f.close();
  EXPECT_THROW(load_model(dir / "m.ckpt"), CorruptionError);
}

TEST(Archive, BadMagic) {
  const auto dir = test::scratch("archive_magic");
  write_bytes(dir / "x", std::vector<unsigned char>(64, 'x'));
  EXPECT_THROW(load_archive(dir / "x"), FormatError);
}

TEST(Archive, SignalRoundTrip) {
  const auto dir = test::scratch("archive_signal");
  Rng rng(1);
  const BoosterSignal s = random_signal(3, 3, 8, 8, rng);
  save_signal(dir / "s.sig", s);
  EXPECT_EQ(load_signal(dir / "s.sig"), s);
}

TEST(Csv, MetricsRoundTrip) {
  const std::vector<MetricsRecord> rows{{"test", "pgd20", SignalMode::Booster, 8.0f / 255.0f, 0.9531f, 0.123f, 1e-7f},
                                        {"train", "natural", SignalMode::Null, 0.0f, 1.0f, 0.0f, 0.0f}};
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kMetricsHeader);
  EXPECT_EQ(read_metrics_csv(ss), rows);
}

TEST(Csv, RejectsMalformed) {
  std::stringstream bad_header("a,b\n");
  EXPECT_THROW(read_metrics_csv(bad_header), FormatError);
  std::stringstream bad_number(std::string(kMetricsHeader) + "\ntest,pgd20,booster,x,0.5,0,0\n");
  EXPECT_THROW(read_metrics_csv(bad_number), FormatError);
  std::stringstream short_row(std::string(kMetricsHeader) + "\ntest,pgd20\n");
  EXPECT_THROW(read_metrics_csv(short_row), FormatError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  static TrainPlan plan() {
    TrainPlan p;
    p.epochs = 1;
    p.subset_size = 64;
    p.signal_iters = 1;
    p.eval_examples = 20;
    p.step1_attack = p.step3_attack = p.step4_attack = "fgsm";
    p.seed = 4;
    return p;
  }
};

TEST_F(CheckpointTest, RoundTrip) {
  const auto dir = test::scratch("ckpt_rt");
  const Dataset train = test::mnist_train().head(128);
  const TrainState s = run(plan(), train);
  save_checkpoint(s, plan(), dir);
  const Checkpoint ck = load_checkpoint(dir);
  EXPECT_EQ(ck.state.epoch, 1u);
  EXPECT_EQ(ck.state.signal, s.signal);
  EXPECT_EQ(ck.state.metrics, s.metrics);
  EXPECT_EQ(ck.state.log, s.log);
  EXPECT_EQ(plan_to_json(ck.plan), plan_to_json(plan()));
  const Tensor x = inject(train.images.slice_batch(0, 8), s.signal);
  EXPECT_EQ(predict(ck.state.model, x), predict(s.model, x));
}

TEST_F(CheckpointTest, MissingSignalIsCorruption) {
  const auto dir = test::scratch("ckpt_nosig");
  save_checkpoint(init_state(plan(), Shape{1, 28, 28}), plan(), dir);
  fs::remove(dir / "signal.sig");
  EXPECT_THROW(load_checkpoint(dir), CorruptionError);
}

TEST_F(CheckpointTest, VersionMismatch) {
  const auto dir = test::scratch("ckpt_version");
  save_checkpoint(init_state(plan(), Shape{1, 28, 28}), plan(), dir);
  std::ifstream in(dir / "state.json");
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  std::string text = ss.str();
  const auto pos = text.find("\"version\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(text.find(':', pos) + 1, 2, "99");
  std::ofstream(dir / "state.json") << text;
  EXPECT_THROW(load_checkpoint(dir), FormatError);
}

TEST_F(CheckpointTest, MissingDirectory) { EXPECT_THROW(load_checkpoint("/nonexistent/ckpt"), DataError); }

TEST_F(CheckpointTest, LatestPicksHighestEpoch) {
  const auto root = test::scratch("ckpt_latest");
  const TrainState s = init_state(plan(), Shape{1, 28, 28});
  save_checkpoint(s, plan(), epoch_dir(root, 0));
  save_checkpoint(s, plan(), epoch_dir(root, 2));
  EXPECT_EQ(latest_checkpoint(root), epoch_dir(root, 2));
  EXPECT_EQ(epoch_dir(root, 7).filename(), "epoch_007");
}

TEST(Plan, JsonRoundTripAndValidation) {
  TrainPlan p;
  p.at_loss = AtLoss::Trades;
  p.subset_size = 33;
  EXPECT_EQ(plan_to_json(plan_from_json(plan_to_json(p))), plan_to_json(p));
  EXPECT_THROW(plan_from_json("{\"subset_size\": 0}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"signal_iters\": 0}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"signal_step\": 0}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"at_loss\": \"trades\", \"trades_beta\": 0}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"epochs\": -2}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"bogus\": 1}"), ConfigError);
  EXPECT_THROW(plan_from_json("not json"), ConfigError);
}

}  // namespace
}  // namespace booster
