#include "booster/harness/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "booster/analysis/analysis.hpp"
#include "booster/attacks/attacks.hpp"
#include "booster/errors.hpp"
#include "booster/harness/unit_properties.hpp"
#include "booster/io/checkpoint.hpp"
#include "booster/io/csv.hpp"
#include "booster/io/dataset.hpp"
#include "booster/training/training.hpp"

namespace booster::harness {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr float kEpsilon = 8.0f / 255.0f;

TrainPlan study_plan(std::size_t epochs, std::uint64_t seed) {
  TrainPlan p;
  p.arch = "cnn-small";
  p.epochs = epochs;
  p.epsilon = kEpsilon;
  p.step1_attack = p.step3_attack = p.step4_attack = "pgd7";
  p.at_loss = AtLoss::Madry;
  p.signal_width = 4;
  p.eval_attack = "natural";
  p.eval_examples = 200;
  p.seed = seed;
  return p;
}

struct RunEval {
  float natural = 0.0f, fgsm = 0.0f, pgd20 = 0.0f;
};

RunEval evaluate_run(const TrainState& s, const Dataset& test, std::uint64_t seed) {
  RunEval r;
  EvalConfig cfg;
  cfg.mode = SignalMode::Booster;
  cfg.seed = seed;
  cfg.grad_stats = false;
  cfg.epsilon = kEpsilon;
  const EvalSignals signals{&s.signal, {}};
  cfg.attack = "natural";
  r.natural = evaluate(s.model, signals, test, cfg).accuracy;
  cfg.attack = "fgsm";
  r.fgsm = evaluate(s.model, signals, test, cfg).accuracy;
  cfg.attack = "pgd20";
  r.pgd20 = evaluate(s.model, signals, test, cfg).accuracy;
  return r;
}

float points(float accuracy) { return 100.0f * accuracy; }

/// Interior/geometry audit run after every training step.
struct GeometryWatch {
  Tensor probe;
  std::size_t steps = 0;
  std::size_t violations = 0;

  StepObserver observer() {
    return [this](std::string_view, const TrainState& s) {
      ++steps;
      const bool crop_ok = same_bits(center_crop(inject(probe, s.signal), s.signal.width()), probe);
      if (!s.signal.interior_is_zero() || !crop_ok) ++violations;
    };
  }
};

struct Study {
  AcceptanceScale scale;
  Dataset train, test;
  std::filesystem::path work;

  // Booster/baseline pairs, one per seed.
  bool trained = false;
  std::vector<TrainState> booster, baseline;
  std::vector<RunEval> booster_eval, baseline_eval;
  double train_seconds = 0.0;

  [[nodiscard]] Dataset small_train() const { return train.head(scale.small_train); }
  [[nodiscard]] Dataset small_test() const { return test.head(scale.small_test); }

  void ensure_trained() {
    if (trained) return;
    for (std::size_t seed = 0; seed < scale.seeds; ++seed) {
      TrainPlan plan = study_plan(scale.epochs, seed);
      TrainState b = run(plan, train, &test);
      plan.signal_width = 0;
      TrainState a = run(plan, train, &test);
      save_checkpoint(b, study_plan(scale.epochs, seed), work / ("booster_seed" + std::to_string(seed)));
      save_checkpoint(a, plan, work / ("baseline_seed" + std::to_string(seed)));
      booster_eval.push_back(evaluate_run(b, test, 1000 + seed));
      baseline_eval.push_back(evaluate_run(a, test, 1000 + seed));
      booster.push_back(std::move(b));
      baseline.push_back(std::move(a));
    }
    write_comparison();
    trained = true;
  }

  void write_comparison() const {
    std::ofstream out(work / "comparison.csv");
    out << "run,seed,attack,accuracy\n";
    const auto rows = [&](const char* name, const std::vector<RunEval>& evals) {
      RunEval mean;
      for (std::size_t s = 0; s < evals.size(); ++s) {
        const RunEval& e = evals[s];
        out << name << ',' << s << ",natural," << format_float(e.natural) << '\n';
        out << name << ',' << s << ",fgsm," << format_float(e.fgsm) << '\n';
        out << name << ',' << s << ",pgd20," << format_float(e.pgd20) << '\n';
        mean.natural += e.natural / static_cast<float>(evals.size());
        mean.fgsm += e.fgsm / static_cast<float>(evals.size());
        mean.pgd20 += e.pgd20 / static_cast<float>(evals.size());
      }
      out << name << ",mean,natural," << format_float(mean.natural) << '\n';
      out << name << ",mean,fgsm," << format_float(mean.fgsm) << '\n';
      out << name << ",mean,pgd20," << format_float(mean.pgd20) << '\n';
    };
    rows("booster", booster_eval);
    rows("baseline", baseline_eval);
  }
};

CheckOutcome gradient_correctness() {
  const auto t0 = Clock::now();
  const auto reports = gradient_registry().run();
  double worst = 0.0;
  std::size_t failed = 0;
  std::string first_failure;
  for (const CheckReport& r : reports) {
    worst = std::max(worst, r.measured);
    if (!r.passed) {
      if (failed++ == 0) first_failure = r.name + ": " + r.detail;
    }
  }
  const double secs = seconds_since(t0);
  CheckOutcome o{failed == 0 && secs < 60.0, worst, 1e-3,
                 std::to_string(reports.size()) + " gradient checks, " + std::to_string(failed) + " failed, " +
                     fmt(secs, 1) + " s (limit 60 s)"};
  if (failed > 0) o.detail += "; " + first_failure;
  return o;
}

CheckOutcome attack_invariants(const Study& st) {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t violations = 0;
  const std::size_t cases = 1000;
  for (std::size_t c = 0; c < cases; ++c) {
    const Model m = build_cnn("cnn-small", 10, Shape{1, 12, 12}, c);
    const Tensor x = uniform_tensor(Shape{2, 1, 12, 12}, 0.0f, 1.0f, rng);
    const std::vector<int> y{static_cast<int>(rng() % 10), static_cast<int>(rng() % 10)};
    AttackSpec spec;
    spec.epsilon = std::uniform_real_distribution<float>(0.0f, 0.3f)(rng);
    spec.steps = 1 + rng() % 10;
    spec.step_size = std::uniform_real_distribution<float>(0.001f, 0.2f)(rng);
    spec.random_start = rng() % 2 == 0;
    const Tensor p = (c % 2 == 0) ? fgsm(m, x, y, spec.epsilon) : pgd(m, x, y, spec, rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float v = x[i] + p[i];
      if (std::abs(p[i]) > spec.epsilon + 1e-6f || v < 0.0f || v > 1.0f) {
        ++violations;
        break;
      }
    }
  }

  // Stronger attack against a trained checkpoint.
  TrainPlan plan = study_plan(st.scale.small_epochs, 7);
  plan.signal_width = 0;
  const Dataset train = st.small_train();
  const Dataset test = st.test.head(500);
  const TrainState trained = train_plain_at(plan, train, nullptr, 0);
  const AttackSpec spec20 = attack_profile("pgd20", kEpsilon);
  Rng attack_rng(99);
  Tensor adv_f = test.images;
  Tensor adv_p = test.images;
  const Tensor pf = fgsm(trained.model, test.images, test.labels, kEpsilon);
  const Tensor pp = pgd(trained.model, test.images, test.labels, spec20, attack_rng);
  for (std::size_t i = 0; i < adv_f.size(); ++i) {
    adv_f[i] += pf[i];
    adv_p[i] += pp[i];
  }
  const auto lf = attack_loss(trained.model, adv_f, test.labels, AttackObjective::CrossEntropy);
  const auto lp = attack_loss(trained.model, adv_p, test.labels, AttackObjective::CrossEntropy);
  std::size_t stronger = 0;
  for (std::size_t i = 0; i < lf.size(); ++i) stronger += lp[i] >= lf[i] ? 1 : 0;
  const double frac = static_cast<double>(stronger) / static_cast<double>(lf.size());
  const double secs = seconds_since(t0);
  return {violations == 0 && frac >= 0.8 && secs < 300.0, frac, 0.8,
          std::to_string(cases) + " randomized cases, " + std::to_string(violations) +
              " budget/box violations; PGD-20 loss >= FGSM loss on " + std::to_string(stronger) + "/" +
              std::to_string(lf.size()) + "; " + fmt(secs, 1) + " s (limit 300 s)"};
}

CheckOutcome injection_geometry(const Study& st) {
  const AcceptanceScale q = scale_for(Profile::Quick);
  const Dataset train = st.train.head(q.train_examples);
  const Dataset test = st.test.head(q.test_examples);
  GeometryWatch watch;
  watch.probe = train.images.slice_batch(0, 16);
  RunOptions opts;
  opts.observer = watch.observer();
  (void)run(study_plan(q.epochs, 3), train, &test, opts);
  return {watch.violations == 0 && watch.steps > 0, static_cast<double>(watch.violations), 0.0,
          std::to_string(watch.steps) + " training steps audited over a " + std::to_string(q.epochs) +
              "-epoch quick-profile run"};
}

double metrics_gap(const std::vector<std::vector<MetricsRecord>>& a, const std::vector<std::vector<MetricsRecord>>& b) {
  if (a.size() != b.size()) return INFINITY;
  double gap = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    if (a[e].size() != b[e].size()) return INFINITY;
    for (std::size_t r = 0; r < a[e].size(); ++r) {
      const MetricsRecord &x = a[e][r], &y = b[e][r];
      if (x.attack != y.attack || x.signal_mode != y.signal_mode) return INFINITY;
      gap = std::max(gap, static_cast<double>(std::abs(x.accuracy - y.accuracy)));
      const double scale = std::max(1e-12, static_cast<double>(std::abs(y.grad_mean)));
      gap = std::max(gap, std::abs(x.grad_mean - y.grad_mean) / scale);
    }
  }
  return gap;
}

CheckOutcome null_reduction(const Study& st) {
  const Dataset train = st.small_train();
  const Dataset test = st.small_test();
  TrainPlan plan = study_plan(st.scale.small_epochs, 5);
  plan.eval_attack = "fgsm";
  plan.eval_examples = test.size();

  plan.signal_width = 0;
  const double gap0 = metrics_gap(run(plan, train, &test).metrics, train_plain_at(plan, train, &test, 0).metrics);
  plan.signal_width = 4;
  plan.signal_steps = false;
  const double gap4 = metrics_gap(run(plan, train, &test).metrics, train_plain_at(plan, train, &test, 4).metrics);
  const double gap = std::max(gap0, gap4);
  return {gap <= 1e-5, gap, 1e-5,
          "w=0 vs plain AT gap " + std::to_string(gap0) + "; frozen null w=4 vs plain AT padded by 4 gap " +
              std::to_string(gap4)};
}

CheckOutcome booster_effect(Study& st) {
  const auto t0 = Clock::now();
  st.ensure_trained();
  st.train_seconds = seconds_since(t0);
  double rob_b = 0, rob_a = 0, nat_b = 0, nat_a = 0;
  const auto n = static_cast<double>(st.booster_eval.size());
  for (std::size_t s = 0; s < st.booster_eval.size(); ++s) {
    rob_b += points(st.booster_eval[s].pgd20) / n;
    rob_a += points(st.baseline_eval[s].pgd20) / n;
    nat_b += points(st.booster_eval[s].natural) / n;
    nat_a += points(st.baseline_eval[s].natural) / n;
  }
  const double gain = rob_b - rob_a;
  const bool ok = gain >= 1.0 && nat_b >= nat_a - 0.5 && st.train_seconds <= 7200.0;
  return {ok, gain, 1.0,
          "PGD-20 booster " + fmt(rob_b) + " vs baseline " + fmt(rob_a) + "; natural booster " + fmt(nat_b) +
              " vs baseline " + fmt(nat_a) + " (min " + fmt(nat_a - 0.5) + "); " + std::to_string(st.booster.size()) +
              " seeds, " + fmt(st.train_seconds, 0) + " s (limit 7200 s)"};
}

CheckOutcome gradient_reduction(Study& st) {
  st.ensure_trained();
  double with = 0.0, without = 0.0;
  for (const TrainState& s : st.booster) {
    const BoosterSignal null = null_signal(s.signal.width(), s.signal.channels(), s.signal.image_height(),
                                           s.signal.image_width());
    with += input_grad_norm_distribution(s.model, s.signal, st.test).mean;
    without += input_grad_norm_distribution(s.model, null, st.test).mean;
  }
  const double rel = without > 0.0 ? (without - with) / without : 0.0;
  const auto n = static_cast<double>(st.booster.size());
  return {rel >= 0.05, rel, 0.05,
          "mean interior input-gradient L2 with signal " + std::to_string(with / n) + ", without " +
              std::to_string(without / n)};
}

CheckOutcome width_monotonicity(Study& st) {
  st.ensure_trained();
  const auto t0 = Clock::now();
  TrainPlan plan = study_plan(st.scale.epochs, 0);
  plan.signal_width = 1;
  const TrainState narrow = run(plan, st.train, &st.test);
  const float acc1 = points(evaluate_run(narrow, st.test, 1000).pgd20);
  const float acc4 = points(st.booster_eval[0].pgd20);
  const double secs = seconds_since(t0);
  return {acc4 >= acc1 - 0.5 && secs <= 3600.0, acc4 - acc1, -0.5,
          "PGD-20 w=4 " + fmt(acc4) + " vs w=1 " + fmt(acc1) + "; " + fmt(secs, 0) + " s (limit 3600 s)"};
}

CheckOutcome subset_size_effect(Study& st) {
  st.ensure_trained();
  const auto t0 = Clock::now();
  TrainPlan plan = study_plan(st.scale.epochs, 0);
  plan.subset_size = 8;
  const TrainState small = run(plan, st.train, &st.test);
  const float base = points(st.baseline_eval[0].pgd20);
  const float gain8 = points(evaluate_run(small, st.test, 1000).pgd20) - base;
  const float gain512 = points(st.booster_eval[0].pgd20) - base;
  const double secs = seconds_since(t0);
  return {gain8 <= gain512 && secs <= 3600.0, gain512 - gain8, 0.0,
          "PGD-20 gain over baseline m=8 " + fmt(gain8) + " vs m=512 " + fmt(gain512) + "; " + fmt(secs, 0) +
              " s (limit 3600 s)"};
}

CheckOutcome landscape_flatness(Study& st) {
  st.ensure_trained();
  const auto t0 = Clock::now();
  const TrainState& s = st.booster[0];
  const BoosterSignal null =
      null_signal(s.signal.width(), s.signal.channels(), s.signal.image_height(), s.signal.image_width());
  Rng rng(31);
  auto picks = permutation(st.test.size(), rng);
  picks.resize(std::min(picks.size(), st.scale.landscape_images));
  std::size_t flatter = 0;
  for (std::size_t idx : picks) {
    LandscapeOptions opts;
    opts.seed = idx;
    const float with = loss_landscape(s.model, st.test, idx, s.signal, opts).range();
    const float without = loss_landscape(s.model, st.test, idx, null, opts).range();
    flatter += with < without ? 1 : 0;
  }
  const double frac = static_cast<double>(flatter) / static_cast<double>(picks.size());
  const double secs = seconds_since(t0);
  return {frac >= 0.6 && secs < 600.0, frac, 0.6,
          std::to_string(flatter) + "/" + std::to_string(picks.size()) + " grids flatter with the signal; " +
              fmt(secs, 0) + " s (limit 600 s)"};
}

CheckOutcome determinism_and_resume(const Study& st) {
  const Dataset train = st.small_train();
  const Dataset test = st.small_test();
  TrainPlan plan = study_plan(st.scale.small_epochs, 11);
  plan.subset_size = 128;
  const auto root = st.work / "determinism";
  std::filesystem::remove_all(root);
  RunOptions a, b, c;
  a.checkpoint_dir = root / "first";
  b.checkpoint_dir = root / "second";
  c.checkpoint_dir = root / "resumed";
  (void)run(plan, train, &test, a);
  (void)run(plan, train, &test, b);

  std::size_t mismatches = 0;
  for (std::size_t e = 1; e <= plan.epochs; ++e) {
    mismatches += read_bytes(epoch_dir(*a.checkpoint_dir, e) / "metrics.csv") !=
                  read_bytes(epoch_dir(*b.checkpoint_dir, e) / "metrics.csv");
  }

  const std::size_t from = plan.epochs - 1;
  Checkpoint ck = load_checkpoint(epoch_dir(*a.checkpoint_dir, from));
  resume(ck.state, ck.plan, train, &test, c);
  std::size_t resume_mismatches = 0;
  for (const char* file : {"metrics.csv", "model.ckpt", "signal.sig", "state.json"}) {
    resume_mismatches += read_bytes(epoch_dir(*a.checkpoint_dir, plan.epochs) / file) !=
                         read_bytes(epoch_dir(*c.checkpoint_dir, plan.epochs) / file);
  }
  const auto total = mismatches + resume_mismatches;
  return {total == 0, static_cast<double>(total), 0.0,
          std::to_string(mismatches) + " metrics.csv differences between repeated runs; " +
              std::to_string(resume_mismatches) + " file differences after resuming from epoch " +
              std::to_string(from)};
}

}  // namespace

AcceptanceScale scale_for(Profile profile) {
  AcceptanceScale s;
  if (profile == Profile::Quick) {
    s.train_examples = 2000;
    s.test_examples = 500;
    s.epochs = 4;
    s.seeds = 1;
    s.landscape_images = 20;
    s.small_train = 500;
    s.small_test = 100;
  }
  return s;
}

std::vector<CheckReport> run_acceptance(const AcceptanceOptions& opts) {
  auto st = std::make_shared<Study>();
  st->scale = scale_for(opts.profile);
  st->train = load_dataset_dir(opts.data_dir, "train").head(st->scale.train_examples);
  st->test = load_dataset_dir(opts.data_dir, "test").head(st->scale.test_examples);
  st->work = opts.work_dir.empty() ? std::filesystem::temp_directory_path() / "booster_acceptance" : opts.work_dir;
  std::filesystem::create_directories(st->work);

  CheckRegistry reg;
  reg.add("gradient_correctness", gradient_correctness);
  reg.add("attack_invariants", [st] { return attack_invariants(*st); });
  reg.add("injection_geometry", [st] { return injection_geometry(*st); });
  reg.add("null_reduction", [st] { return null_reduction(*st); });
  reg.add("booster_beats_baseline", [st] { return booster_effect(*st); });
  reg.add("input_gradient_reduction", [st] { return gradient_reduction(*st); });
  reg.add("width_monotonicity", [st] { return width_monotonicity(*st); });
  reg.add("subset_size_effect", [st] { return subset_size_effect(*st); });
  reg.add("landscape_flatness", [st] { return landscape_flatness(*st); });
  reg.add("determinism_and_resume", [st] { return determinism_and_resume(*st); });

  auto reports = reg.run(opts.sink);
  write_report_csv(st->work / "report.csv", reports);
  return reports;
}

}  // namespace booster::harness
