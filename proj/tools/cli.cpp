#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "booster/analysis/analysis.hpp"
#include "booster/errors.hpp"
#include "booster/io/archive.hpp"
#include "booster/io/checkpoint.hpp"
#include "booster/io/csv.hpp"
#include "booster/io/dataset.hpp"
#include "booster/training/training.hpp"

namespace booster::cli {
namespace {

namespace fs = std::filesystem;

struct DataArgs {
  std::string dir;
  std::size_t train_examples = 0;  // 0 keeps everything
  std::size_t test_examples = 0;
};

void add_data_options(CLI::App& cmd, DataArgs& d, bool limits) {
  cmd.add_option("--data", d.dir, "directory with MNIST IDX files or CIFAR-10 batches")->required();
  if (limits) {
    cmd.add_option("--train-examples", d.train_examples, "use only the first N training examples");
    cmd.add_option("--test-examples", d.test_examples, "use only the first N test examples");
  }
}

/// An epoch directory, or a run directory whose latest epoch is used.
Checkpoint open_checkpoint(const fs::path& path) {
  if (fs::is_directory(path) && !fs::exists(path / "state.json")) {
    if (auto latest = latest_checkpoint(path)) return load_checkpoint(*latest);
  }
  return load_checkpoint(path);
}

fs::path checkpoint_epoch_dir(const fs::path& path) {
  if (fs::is_directory(path) && !fs::exists(path / "state.json")) {
    if (auto latest = latest_checkpoint(path)) return *latest;
  }
  return path;
}

int cmd_train(const std::string& plan_path, const DataArgs& d, const std::string& out_dir, bool resume_run,
              std::ostream& out) {
  const TrainPlan plan = load_plan(plan_path);
  const Dataset train = load_dataset_dir(d.dir, "train").head(d.train_examples);
  const Dataset test = load_dataset_dir(d.dir, "test").head(d.test_examples);
  RunOptions opts;
  opts.checkpoint_dir = fs::path(out_dir);
  opts.observer = [&out](std::string_view step, const TrainState& s) {
    if (step == "step4") out << "epoch " << s.epoch + 1 << " done" << std::endl;
  };
  fs::create_directories(out_dir);
  save_plan(fs::path(out_dir) / "plan.json", plan);

  std::optional<fs::path> latest = resume_run ? latest_checkpoint(out_dir) : std::nullopt;
  TrainState state;
  if (latest) {
    Checkpoint ck = load_checkpoint(*latest);
    out << "resuming from " << latest->string() << std::endl;
    resume(ck.state, plan, train, &test, opts);
    state = std::move(ck.state);
  } else {
    state = run(plan, train, &test, opts);
  }
  if (!state.metrics.empty()) write_metrics_csv(out, state.metrics.back());
  return kOk;
}

std::vector<BoosterSignal> load_pool(const std::vector<std::string>& files) {
  std::vector<BoosterSignal> pool;
  for (const auto& f : files) pool.push_back(load_signal(f));
  return pool;
}

int cmd_eval(const std::string& ckpt, const DataArgs& d, const std::string& split, EvalConfig cfg,
             const std::vector<std::string>& pool_files, const std::string& out_path, std::ostream& out) {
  const Checkpoint ck = open_checkpoint(ckpt);
  const Dataset data = load_dataset_dir(d.dir, split).head(split == "train" ? d.train_examples : d.test_examples);
  const auto pool = load_pool(pool_files);
  if (cfg.mode == SignalMode::Pool && pool.empty()) throw ConfigError("--signal pool needs at least one --pool file");
  cfg.split = split;
  const MetricsRecord r = evaluate(ck.state.model, EvalSignals{&ck.state.signal, pool}, data, cfg);
  const std::vector<MetricsRecord> rows{r};
  if (out_path.empty()) {
    write_metrics_csv(out, rows);
  } else {
    write_metrics_csv(fs::path(out_path), rows);
  }
  return kOk;
}

int cmd_analyze(const std::string& ckpt, const DataArgs& d, const std::string& mode, SignalMode signal_mode,
                std::size_t index, std::vector<float> epsilons, const std::string& attack, std::size_t bins,
                std::size_t resolution, std::string out_path, std::ostream& out) {
  const Checkpoint ck = open_checkpoint(ckpt);
  const Dataset data = load_dataset_dir(d.dir, "test").head(d.test_examples);
  const BoosterSignal& booster = ck.state.signal;
  const BoosterSignal null = null_signal(booster.width(), booster.channels(), booster.image_height(),
                                         booster.image_width());
  const BoosterSignal& signal = signal_mode == SignalMode::Null ? null : booster;
  if (signal_mode == SignalMode::Pool) throw ConfigError("analyze supports --signal null or booster");
  const fs::path dir = checkpoint_epoch_dir(ckpt);

  if (mode == "gradnorm") {
    const GradNormStats stats = input_grad_norm_distribution(ck.state.model, signal, data, bins);
    if (out_path.empty()) out_path = (dir / ("gradnorm_" + std::string(to_string(signal_mode)) + ".csv")).string();
    write_histogram_csv(out_path, stats.histogram);
    out << "mean " << stats.mean << " median " << stats.median << " -> " << out_path << "\n";
  } else if (mode == "landscape") {
    if (index >= data.size()) throw ConfigError("--index " + std::to_string(index) + " out of range");
    LandscapeOptions opts;
    opts.resolution = resolution;
    opts.seed = index;
    const LandscapeGrid grid = loss_landscape(ck.state.model, data, index, signal, opts);
    if (out_path.empty()) {
      out_path = (dir / ("landscape_" + std::to_string(index) + "_" + std::string(to_string(signal_mode)) + ".csv"))
                     .string();
    }
    write_landscape_csv(out_path, grid);
    out << "range " << grid.range() << " -> " << out_path << "\n";
  } else if (mode == "curve") {
    if (epsilons.empty()) {
      for (int k : {0, 2, 4, 6, 8, 10, 12}) epsilons.push_back(static_cast<float>(k) / 255.0f);
    }
    const auto curve = robustness_curve(ck.state.model, EvalSignals{&booster, {}}, signal_mode, data, epsilons, attack);
    if (out_path.empty()) {
      write_curve_csv(out, curve);
    } else {
      write_curve_csv(fs::path(out_path), curve);
    }
  } else {
    throw ConfigError("unknown analyze mode '" + mode + "'");
  }
  return kOk;
}

int cmd_sweep(const std::string& kind, const std::vector<std::size_t>& values, const std::string& plan_path,
              const DataArgs& d, const std::string& out_dir, std::ostream& out) {
  const TrainPlan plan = load_plan(plan_path);
  const Dataset train = load_dataset_dir(d.dir, "train").head(d.train_examples);
  const Dataset test = load_dataset_dir(d.dir, "test").head(d.test_examples);
  std::vector<SweepPoint> points;
  if (kind == "width") {
    points = width_sweep(plan, values, train, &test);
  } else if (kind == "subset") {
    points = subset_size_sweep(plan, values, train, &test);
  } else {
    throw ConfigError("unknown sweep kind '" + kind + "'");
  }
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / ("sweep_" + kind + ".csv");
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "value," << kMetricsHeader << "\n";
  for (const SweepPoint& p : points) {
    std::stringstream rows;
    write_metrics_csv(rows, p.final_metrics);
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) f << p.value << ',' << line << "\n";
  }
  out << points.size() << " runs -> " << path.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Booster-signal adversarial training", "booster"};
  app.require_subcommand(1);

  DataArgs data;

  std::string plan_path, out_dir;
  bool resume_run = false;
  auto* train = app.add_subcommand("train", "train theta and the booster signal");
  train->add_option("--plan", plan_path, "plan.json")->required()->check(CLI::ExistingFile);
  add_data_options(*train, data, true);
  train->add_option("--out", out_dir, "run directory; epoch_NNN/ is written after every epoch")->required();
  train->add_flag("--resume", resume_run, "continue from the latest checkpoint in --out");

  std::string ckpt, attack = "pgd20", signal = "booster", split = "test", eval_out;
  float epsilon = 8.0f / 255.0f;
  std::uint64_t seed = 0;
  bool interior_only = false;
  std::vector<std::string> pool_files;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt, "epoch directory or run directory")->required();
  add_data_options(*eval, data, true);
  eval->add_option("--attack", attack, "natural, fgsm, pgd7, pgd20, cw200");
  eval->add_option("--signal", signal, "frame injected at test time")
      ->check(CLI::IsMember({"null", "booster", "pool"}));
  eval->add_option("--pool", pool_files, "signal files drawn from in pool mode");
  eval->add_option("--epsilon", epsilon, "L-inf budget in [0, 1] pixel units");
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--seed", seed);
  eval->add_flag("--interior-only", interior_only, "attack image pixels only, not the frame");
  eval->add_option("--out", eval_out, "metrics CSV path (stdout when omitted)");

  std::string mode, analyze_out, analyze_signal = "booster", curve_attack = "pgd20";
  std::size_t index = 0, bins = 20, resolution = 21;
  std::vector<float> epsilons;
  auto* analyze = app.add_subcommand("analyze", "input-gradient norms, loss landscapes, robustness curves");
  analyze->add_option("--ckpt", ckpt, "epoch directory or run directory")->required();
  add_data_options(*analyze, data, true);
  analyze->add_option("--mode", mode)->required()->check(CLI::IsMember({"gradnorm", "landscape", "curve"}));
  analyze->add_option("--signal", analyze_signal)->check(CLI::IsMember({"null", "booster"}));
  analyze->add_option("--index", index, "test image for the landscape");
  analyze->add_option("--resolution", resolution, "landscape grid points per axis (odd)");
  analyze->add_option("--bins", bins, "histogram bins");
  analyze->add_option("--epsilons", epsilons, "curve budgets in [0, 1] pixel units")->delimiter(',');
  analyze->add_option("--attack", curve_attack, "attack profile for the curve");
  analyze->add_option("--out", analyze_out, "output CSV");

  std::string kind, sweep_plan, sweep_out;
  std::vector<std::size_t> values;
  auto* sweep = app.add_subcommand("sweep", "one training run per width or subset size");
  sweep->add_option("--kind", kind)->required()->check(CLI::IsMember({"width", "subset"}));
  sweep->add_option("--values", values)->required()->delimiter(',');
  sweep->add_option("--plan", sweep_plan, "base plan.json")->required()->check(CLI::ExistingFile);
  add_data_options(*sweep, data, true);
  sweep->add_option("--out", sweep_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (e.get_exit_code() != 0) {
      err << app.help();
      return kConfig;
    }
    return kOk;
  }

  try {
    if (*train) return cmd_train(plan_path, data, out_dir, resume_run, out);
    if (*eval) {
      EvalConfig cfg;
      cfg.attack = attack;
      cfg.epsilon = epsilon;
      cfg.mode = signal_mode_from_string(signal);
      cfg.seed = seed;
      cfg.interior_only_attack = interior_only;
      return cmd_eval(ckpt, data, split, cfg, pool_files, eval_out, out);
    }
    if (*analyze) {
      return cmd_analyze(ckpt, data, mode, signal_mode_from_string(analyze_signal), index, epsilons, curve_attack,
                         bins, resolution, analyze_out, out);
    }
    if (*sweep) return cmd_sweep(kind, values, sweep_plan, data, sweep_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const CorruptionError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kConfig;
}

}  // namespace booster::cli
