#include "booster/training/plan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <type_traits>

#include "booster/errors.hpp"
#include "json.hpp"

namespace booster {
namespace {

using nlohmann::json;

float cosine(float base, std::size_t epoch, std::size_t epochs) {
  if (epochs <= 1) return base;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs);
  return static_cast<float>(base * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError(std::string("plan field '") + key + "' must be a non-negative integer");
    }
    try {
      field = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("plan field '") + key + "': " + e.what());
    }
  }
}

}  // namespace

void TrainPlan::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError("plan: " + msg); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (subset_size < 1) fail("subset_size must be >= 1");
  if (signal_iters < 1) fail("signal_iters must be >= 1");
  if (!(signal_step > 0.0f)) fail("signal_step must be > 0");
  if (alternations < 1) fail("alternations must be >= 1");
  if (at_loss == AtLoss::Trades && !(trades_beta > 0.0f)) fail("trades_beta must be > 0");
  if (!(lr > 0.0f)) fail("lr must be > 0");
  if (!(epsilon >= 0.0f)) fail("epsilon must be >= 0");
  if (lr_schedule != "cosine" && lr_schedule != "constant") fail("lr_schedule must be cosine or constant");
  if (signal_schedule != "cosine" && signal_schedule != "constant") fail("signal_schedule must be cosine or constant");
  if (signal_init != "uniform" && signal_init != "zero") fail("signal_init must be uniform or zero");
  if (num_classes < 2) fail("num_classes must be >= 2");
  for (const auto* name : {&step1_attack, &step3_attack, &step4_attack, &eval_attack}) {
    if (!is_attack_profile(*name)) fail("unknown attack profile '" + *name + "'");
  }
}

float TrainPlan::lr_at(std::size_t epoch) const {
  return lr_schedule == "cosine" ? cosine(lr, epoch, epochs) : lr;
}

float TrainPlan::signal_step_at(std::size_t epoch) const {
  return signal_schedule == "cosine" ? cosine(signal_step, epoch, epochs) : signal_step;
}

TrainPlan plan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("plan must be a JSON object");
  TrainPlan p;
  read(j, "arch", p.arch);
  read(j, "epochs", p.epochs);
  read(j, "batch_size", p.batch_size);
  read(j, "lr", p.lr);
  read(j, "momentum", p.momentum);
  read(j, "weight_decay", p.weight_decay);
  read(j, "lr_schedule", p.lr_schedule);
  if (auto it = j.find("at_loss"); it != j.end()) {
    const auto name = it->get<std::string>();
    if (name == "madry") {
      p.at_loss = AtLoss::Madry;
    } else if (name == "trades") {
      p.at_loss = AtLoss::Trades;
    } else {
      throw ConfigError("plan: at_loss must be madry or trades");
    }
  }
  read(j, "trades_beta", p.trades_beta);
  read(j, "epsilon", p.epsilon);
  read(j, "step1_attack", p.step1_attack);
  read(j, "step3_attack", p.step3_attack);
  read(j, "step4_attack", p.step4_attack);
  read(j, "signal_width", p.signal_width);
  read(j, "signal_steps", p.signal_steps);
  read(j, "signal_init", p.signal_init);
  read(j, "subset_size", p.subset_size);
  read(j, "signal_iters", p.signal_iters);
  read(j, "signal_step", p.signal_step);
  read(j, "signal_schedule", p.signal_schedule);
  read(j, "signal_momentum", p.signal_momentum);
  read(j, "alternations", p.alternations);
  read(j, "eval_attack", p.eval_attack);
  read(j, "eval_examples", p.eval_examples);
  read(j, "num_classes", p.num_classes);
  read(j, "seed", p.seed);
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"arch", "epochs", "batch_size", "lr", "momentum", "weight_decay", "lr_schedule",
                                  "at_loss", "trades_beta", "epsilon", "step1_attack", "step3_attack",
                                  "step4_attack", "signal_width", "signal_steps", "signal_init", "subset_size",
                                  "signal_iters", "signal_step", "signal_schedule", "signal_momentum",
                                  "alternations", "eval_attack", "eval_examples", "num_classes", "seed"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("plan: unknown field '" + key + "'");
    }
  }
  p.validate();
  return p;
}

std::string plan_to_json(const TrainPlan& p) {
  json j = {
      {"arch", p.arch},
      {"epochs", p.epochs},
      {"batch_size", p.batch_size},
      {"lr", p.lr},
      {"momentum", p.momentum},
      {"weight_decay", p.weight_decay},
      {"lr_schedule", p.lr_schedule},
      {"at_loss", p.at_loss == AtLoss::Madry ? "madry" : "trades"},
      {"trades_beta", p.trades_beta},
      {"epsilon", p.epsilon},
      {"step1_attack", p.step1_attack},
      {"step3_attack", p.step3_attack},
      {"step4_attack", p.step4_attack},
      {"signal_width", p.signal_width},
      {"signal_steps", p.signal_steps},
      {"signal_init", p.signal_init},
      {"subset_size", p.subset_size},
      {"signal_iters", p.signal_iters},
      {"signal_step", p.signal_step},
      {"signal_schedule", p.signal_schedule},
      {"signal_momentum", p.signal_momentum},
      {"alternations", p.alternations},
      {"eval_attack", p.eval_attack},
      {"eval_examples", p.eval_examples},
      {"num_classes", p.num_classes},
      {"seed", p.seed},
  };
  return j.dump(2);
}

TrainPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read plan " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return plan_from_json(ss.str());
}

void save_plan(const std::filesystem::path& path, const TrainPlan& plan) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write plan " + path.string());
  out << plan_to_json(plan) << '\n';
}

}  // namespace booster
