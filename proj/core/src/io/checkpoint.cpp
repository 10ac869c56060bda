#include "booster/io/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "booster/errors.hpp"
#include "booster/io/archive.hpp"
#include "booster/io/csv.hpp"

namespace booster {
namespace {

using nlohmann::json;

constexpr const char* kVelocityPrefix = "optim.velocity.";
constexpr const char* kSignalVelocity = "signal.velocity";

json record_to_json(const MetricsRecord& r) {
  return {{"split", r.split},       {"attack", r.attack},         {"signal_mode", to_string(r.signal_mode)},
          {"epsilon", r.epsilon},   {"accuracy", r.accuracy},     {"grad_mean", r.grad_mean},
          {"grad_p50", r.grad_p50}};
}

MetricsRecord record_from_json(const json& j) {
  MetricsRecord r;
  r.split = j.at("split").get<std::string>();
  r.attack = j.at("attack").get<std::string>();
  r.signal_mode = signal_mode_from_string(j.at("signal_mode").get<std::string>());
  r.epsilon = j.at("epsilon").get<float>();
  r.accuracy = j.at("accuracy").get<float>();
  r.grad_mean = j.at("grad_mean").get<float>();
  r.grad_p50 = j.at("grad_p50").get<float>();
  return r;
}

}  // namespace

std::filesystem::path epoch_dir(const std::filesystem::path& root, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03zu", epoch);
  return root / name;
}

void save_checkpoint(const TrainState& state, const TrainPlan& plan, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  TensorArchive ar = model_archive(state.model);
  ar.meta["optimizer.lr"] = format_float(state.optimizer.lr());
  const auto& vel = state.optimizer.velocity();
  for (std::size_t i = 0; i < vel.size(); ++i) {
    ar.tensors.push_back({kVelocityPrefix + state.model.params()[i].name, vel[i]});
  }
  if (state.signal_stepper.velocity().size() > 0) {
    ar.tensors.push_back({kSignalVelocity, state.signal_stepper.velocity()});
  }
  save_archive(dir / "model.ckpt", ar);
  save_signal(dir / "signal.sig", state.signal);
  write_metrics_csv(dir / "metrics.csv",
                    state.metrics.empty() ? std::span<const MetricsRecord>{} : std::span(state.metrics.back()));

  json j;
  j["version"] = kCheckpointVersion;
  j["epoch"] = state.epoch;
  j["rng"] = serialize_rng(state.rng);
  j["plan"] = json::parse(plan_to_json(plan));
  json metrics = json::array();
  for (const auto& block : state.metrics) {
    json rows = json::array();
    for (const auto& r : block) rows.push_back(record_to_json(r));
    metrics.push_back(std::move(rows));
  }
  j["metrics"] = std::move(metrics);
  json log = json::array();
  for (const auto& e : state.log) log.push_back({e.epoch, e.step, e.index, e.loss});
  j["log"] = std::move(log);
  std::ofstream out(dir / "state.json");
  if (!out) throw DataError("cannot write " + (dir / "state.json").string());
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
  const auto state_path = dir / "state.json";
  std::ifstream in(state_path);
  if (!in) throw CorruptionError("checkpoint is missing " + state_path.string());
  std::stringstream text;
  text << in.rdbuf();

  Checkpoint ck;
  try {
    const json j = json::parse(text.str());
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("checkpoint version " + j.at("version").dump() + " is not supported");
    }
    ck.plan = plan_from_json(j.at("plan").dump());
    ck.state.epoch = j.at("epoch").get<std::size_t>();
    ck.state.rng = deserialize_rng(j.at("rng").get<std::string>());
    for (const auto& block : j.at("metrics")) {
      std::vector<MetricsRecord> rows;
      for (const auto& r : block) rows.push_back(record_from_json(r));
      ck.state.metrics.push_back(std::move(rows));
    }
    for (const auto& e : j.at("log")) {
      ck.state.log.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::string>(), e.at(2).get<std::size_t>(),
                              e.at(3).get<float>()});
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed state.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError("malformed state.json: " + std::string(e.what()));
  }

  const TensorArchive ar = load_archive(dir / "model.ckpt");
  ck.state.model = model_from_archive(ar);
  ck.state.signal = load_signal(dir / "signal.sig");
  ck.state.optimizer = ad::Sgd(ck.plan.lr_at(ck.state.epoch), ck.plan.momentum, ck.plan.weight_decay);
  if (auto it = ar.meta.find("optimizer.lr"); it != ar.meta.end()) ck.state.optimizer.set_lr(parse_float(it->second));
  std::vector<Tensor> vel;
  for (const auto& p : ck.state.model.params()) {
    if (const Tensor* v = ar.find(kVelocityPrefix + p.name)) vel.push_back(*v);
  }
  if (!vel.empty()) {
    if (vel.size() != ck.state.model.params().size()) throw FormatError("checkpoint has partial optimizer state");
    ck.state.optimizer.set_velocity(std::move(vel));
  }
  ck.state.signal_stepper = SignalStepper(ck.plan.signal_momentum);
  if (const Tensor* v = ar.find(kSignalVelocity)) ck.state.signal_stepper.set_velocity(*v);
  return ck;
}

std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) return std::nullopt;
  std::optional<std::filesystem::path> best;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("epoch_", 0) != 0) continue;
    if (!best || name > best->filename().string()) best = entry.path();
  }
  return best;
}

}  // namespace booster
