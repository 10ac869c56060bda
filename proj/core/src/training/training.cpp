#include "booster/training/training.hpp"

#include <algorithm>
#include <cstdio>

#include "booster/analysis/analysis.hpp"
#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/io/checkpoint.hpp"

namespace booster {
namespace {

constexpr std::size_t kChunk = 64;
// Offset separating the training stream from the initialization stream.
constexpr std::uint64_t kStreamSalt = 0x9e3779b97f4a7c15ULL;

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

// Mean loss and parameter gradients over a batch, accumulated in chunks of kChunk rows.
// `chunk_loss(graph, params, begin, end)` records the summed loss of rows [begin, end).
template <typename ChunkLoss>
LossAndGrads chunked_gradients(const Model& model, std::size_t n, ChunkLoss&& chunk_loss) {
  LossAndGrads out;
  for (const NamedTensor& p : model.params()) out.grads.emplace_back(p.value.shape(), 0.0f);
  double total = 0.0;
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    ad::Graph g;
    std::vector<ad::Var> params;
    params.reserve(model.params().size());
    for (const NamedTensor& p : model.params()) params.push_back(g.borrow(p.value, true));
    const auto r = ad::eval_with_grad(g, chunk_loss(g, params, b, e), params);
    total += r.loss;
    for (std::size_t i = 0; i < params.size(); ++i) {
      float* dst = out.grads[i].ptr();
      const float* src = r.grads[i].ptr();
      for (std::size_t k = 0; k < out.grads[i].size(); ++k) dst[k] += src[k];
    }
  }
  const float inv = 1.0f / static_cast<float>(n);
  for (Tensor& t : out.grads) {
    for (float& v : t.data()) v *= inv;
  }
  out.loss = static_cast<float>(total / static_cast<double>(n));
  return out;
}

// One adversarial-training pass over `data` with `signal` injected.
void adversarial_pass(TrainState& state, const Dataset& data, const TrainPlan& plan, const BoosterSignal& signal,
                      const std::string& attack_name, const char* step_name) {
  const AttackSpec attack = plan.attack(attack_name);
  state.optimizer.set_lr(plan.lr_at(state.epoch));
  const auto order = permutation(data.size(), state.rng);
  auto params = state.model.param_ptrs();
  std::size_t batch_index = 0;
  for (std::size_t b = 0; b < order.size(); b += plan.batch_size, ++batch_index) {
    const std::span<const std::size_t> rows(order.data() + b, std::min(plan.batch_size, order.size() - b));
    const Tensor canvas = inject(data.batch_images(rows), signal);
    const auto labels = data.batch_labels(rows);
    const LossAndGrads r = plan.at_loss == AtLoss::Madry
                               ? at_loss_madry(state.model, canvas, labels, attack, state.rng)
                               : at_loss_trades(state.model, canvas, labels, attack, plan.trades_beta, state.rng);
    state.optimizer.step(params, r.grads);
    state.log.push_back({state.epoch, step_name, batch_index, r.loss});
  }
}

}  // namespace

TrainState init_state(const TrainPlan& plan, const Shape& image_shape) {
  plan.validate();
  if (image_shape.rank() != 3) throw ShapeError("image shape must be C×H×W, got " + image_shape.str());
  const std::size_t c = image_shape[0], h = image_shape[1], w = image_shape[2];
  const std::size_t width = plan.signal_width;
  TrainState s;
  s.model = build_cnn(plan.arch, plan.num_classes, Shape{c, h + 2 * width, w + 2 * width}, plan.seed);
  s.rng = Rng(plan.seed ^ kStreamSalt);
  s.optimizer = ad::Sgd(plan.lr_at(0), plan.momentum, plan.weight_decay);
  s.signal_stepper = SignalStepper(plan.signal_momentum);
  if (plan.signal_steps && width > 0 && plan.signal_init == "uniform") {
    s.signal = random_signal(width, c, h, w, s.rng);
  } else {
    s.signal = null_signal(width, c, h, w);
  }
  return s;
}

LossAndGrads at_loss_madry(const Model& model, const Tensor& injected_batch, std::span<const int> labels,
                           const AttackSpec& attack, Rng& rng) {
  const Tensor p = perturb(model, injected_batch, labels, attack, rng);
  const Tensor adv = add_tensors(injected_batch, p);
  return chunked_gradients(model, adv.shape()[0], [&](ad::Graph& g, std::span<const ad::Var> params, std::size_t b,
                                                      std::size_t e) {
    ad::Var logits = model.apply(g.leaf(adv.slice_batch(b, e)), params);
    return ad::softmax_cross_entropy(logits, labels.subspan(b, e - b), ad::Reduction::Sum);
  });
}

LossAndGrads at_loss_trades(const Model& model, const Tensor& injected_batch, std::span<const int> labels,
                            const AttackSpec& attack, float beta, Rng& rng) {
  if (!(beta > 0.0f)) throw ConfigError("TRADES beta must be > 0");
  AttackOptions opts;
  opts.objective = AttackObjective::KlToClean;
  const Tensor p = perturb(model, injected_batch, labels, attack, rng, opts);
  const Tensor adv = add_tensors(injected_batch, p);
  return chunked_gradients(model, adv.shape()[0], [&](ad::Graph& g, std::span<const ad::Var> params, std::size_t b,
                                                      std::size_t e) {
    // Both forwards share the parameter leaves so gradients accumulate on one set.
    ad::Var clean = model.apply(g.leaf(injected_batch.slice_batch(b, e)), params);
    ad::Var robust = model.apply(g.leaf(adv.slice_batch(b, e)), params);
    ad::Var ce = ad::softmax_cross_entropy(clean, labels.subspan(b, e - b), ad::Reduction::Sum);
    ad::Var kl = ad::kl_divergence(clean, robust, ad::Reduction::Sum);
    return ad::add(ce, ad::scale(kl, beta));
  });
}

Partition make_subsets(std::size_t n, std::size_t m, Rng& rng) {
  if (m == 0) throw ConfigError("subset size must be >= 1");
  const auto order = permutation(n, rng);
  Partition parts;
  for (std::size_t b = 0; b < n; b += m) {
    parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                       order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + m)));
  }
  return parts;
}

SignalGrad signal_gradient(const Model& model, const Tensor& images, std::span<const int> labels,
                           const BoosterSignal& signal, const Tensor* perturbations) {
  const std::size_t n = images.shape()[0];
  if (labels.size() != n) throw ShapeError("signal_gradient: label count mismatch");
  if (n == 0) throw ConfigError("signal_gradient: empty subset");
  SignalGrad out;
  out.grad = Tensor(signal.canvas_shape(), 0.0f);
  double loss = 0.0;
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    const Tensor x = images.slice_batch(b, e);
    ad::Graph g;
    ad::Var frame = g.borrow(signal.frame(), true);
    ad::Var canvas = ad::inject(g.borrow(x), frame, signal.width());
    Tensor p;
    if (perturbations != nullptr) {
      p = perturbations->slice_batch(b, e);
      canvas = ad::add(canvas, g.borrow(p));
    }
    ad::Var ce = ad::softmax_cross_entropy(model.forward(g, canvas).logits, labels.subspan(b, e - b),
                                           ad::Reduction::Sum);
    g.backward(ce);
    loss += ce.value().item();
    const Tensor& gf = g.grad(frame);
    for (std::size_t i = 0; i < gf.size(); ++i) out.grad[i] += gf[i];
  }
  const float inv = 1.0f / static_cast<float>(n);
  for (float& v : out.grad.data()) v *= inv;
  out.loss = static_cast<float>(loss / static_cast<double>(n));
  return out;
}

bool signal_trainable(const TrainState& state, const TrainPlan& plan) {
  return plan.signal_steps && state.signal.trainable_size() > 0;
}

void step1_robustify(TrainState& state, const Dataset& data, const TrainPlan& plan) {
  const BoosterSignal null = null_signal(state.signal.width(), state.signal.channels(), state.signal.image_height(),
                                         state.signal.image_width());
  adversarial_pass(state, data, plan, null, plan.step1_attack, "step1");
}

void step2_standard_signal(TrainState& state, const Dataset& data, const Partition& subsets, const TrainPlan& plan) {
  if (!signal_trainable(state, plan)) return;
  const float eta = plan.signal_step_at(state.epoch);
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    const Tensor x = data.batch_images(subsets[s]);
    const auto y = data.batch_labels(subsets[s]);
    float last = 0.0f;
    for (std::size_t k = 0; k < plan.signal_iters; ++k) {
      const SignalGrad sg = signal_gradient(state.model, x, y, state.signal);
      state.signal = state.signal_stepper.step(state.signal, sg.grad, eta);
      last = sg.loss;
    }
    state.log.push_back({state.epoch, "step2", s, last});
  }
}

void step3_adversarial_signal(TrainState& state, const Dataset& data, const Partition& subsets,
                              const TrainPlan& plan) {
  if (!signal_trainable(state, plan)) return;
  const float eta = plan.signal_step_at(state.epoch);
  const AttackSpec attack = plan.attack(plan.step3_attack);
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    const Tensor x = data.batch_images(subsets[s]);
    const auto y = data.batch_labels(subsets[s]);
    float last = 0.0f;
    for (std::size_t k = 0; k < plan.signal_iters; ++k) {
      const Tensor canvas = inject(x, state.signal);
      const Tensor p = perturb(state.model, canvas, y, attack, state.rng);
      for (std::size_t a = 0; a < plan.alternations; ++a) {
        const SignalGrad sg = signal_gradient(state.model, x, y, state.signal, &p);
        state.signal = state.signal_stepper.step(state.signal, sg.grad, eta);
        last = sg.loss;
      }
    }
    state.log.push_back({state.epoch, "step3", s, last});
  }
}

void step4_at_with_signal(TrainState& state, const Dataset& data, const TrainPlan& plan) {
  const BoosterSignal signal = state.signal;
  adversarial_pass(state, data, plan, signal, plan.step4_attack, "step4");
}

std::vector<MetricsRecord> epoch_metrics(const TrainState& state, const Dataset& eval_set, const TrainPlan& plan) {
  std::vector<MetricsRecord> rows;
  std::vector<std::string> attacks{"natural"};
  if (plan.eval_attack != "natural" && plan.eval_attack != "none") attacks.push_back(plan.eval_attack);
  for (const auto& name : attacks) {
    for (SignalMode mode : {SignalMode::Booster, SignalMode::Null}) {
      EvalConfig cfg;
      cfg.attack = name;
      cfg.epsilon = plan.epsilon;
      cfg.mode = mode;
      cfg.seed = plan.seed;
      rows.push_back(evaluate(state.model, EvalSignals{&state.signal, {}}, eval_set, cfg));
    }
  }
  return rows;
}

void run_epoch(TrainState& state, const Dataset& train, const Dataset* test, const TrainPlan& plan,
               const StepObserver& observer) {
  const auto notify = [&](std::string_view step) {
    if (observer) observer(step, state);
  };
  step1_robustify(state, train, plan);
  notify("step1");
  // One partition per epoch, shared by steps 2 and 3.
  Partition subsets;
  if (signal_trainable(state, plan)) subsets = make_subsets(train.size(), plan.subset_size, state.rng);
  step2_standard_signal(state, train, subsets, plan);
  notify("step2");
  step3_adversarial_signal(state, train, subsets, plan);
  notify("step3");
  step4_at_with_signal(state, train, plan);
  notify("step4");

  const Dataset eval_set = test != nullptr ? test->head(plan.eval_examples) : train.head(plan.eval_examples);
  state.metrics.push_back(epoch_metrics(state, eval_set, plan));
  ++state.epoch;
}

void resume(TrainState& state, const TrainPlan& plan, const Dataset& train, const Dataset* test,
            const RunOptions& opts) {
  plan.validate();
  if (train.size() == 0) throw ConfigError("empty training set");
  while (state.epoch < plan.epochs) {
    run_epoch(state, train, test, plan, opts.observer);
    if (opts.checkpoint_dir) save_checkpoint(state, plan, epoch_dir(*opts.checkpoint_dir, state.epoch));
  }
}

TrainState run(const TrainPlan& plan, const Dataset& train, const Dataset* test, const RunOptions& opts) {
  TrainState state = init_state(plan, train.image_shape());
  if (opts.checkpoint_dir) save_checkpoint(state, plan, epoch_dir(*opts.checkpoint_dir, 0));
  resume(state, plan, train, test, opts);
  return state;
}

TrainState train_plain_at(const TrainPlan& plan, const Dataset& train, const Dataset* test, std::size_t pad,
                          std::size_t passes_per_epoch) {
  plan.validate();
  const Shape is = train.image_shape();
  TrainState s;
  s.model = build_cnn(plan.arch, plan.num_classes, Shape{is[0], is[1] + 2 * pad, is[2] + 2 * pad}, plan.seed);
  s.rng = Rng(plan.seed ^ kStreamSalt);
  s.optimizer = ad::Sgd(plan.lr_at(0), plan.momentum, plan.weight_decay);
  s.signal = null_signal(pad, is[0], is[1], is[2]);

  const AttackSpec attack = plan.attack(plan.step1_attack);
  auto params = s.model.param_ptrs();
  const Dataset eval_set = test != nullptr ? test->head(plan.eval_examples) : train.head(plan.eval_examples);
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    for (std::size_t pass = 0; pass < passes_per_epoch; ++pass) {
      s.optimizer.set_lr(plan.lr_at(epoch));
      const auto order = permutation(train.size(), s.rng);
      for (std::size_t b = 0; b < order.size(); b += plan.batch_size) {
        const std::span<const std::size_t> rows(order.data() + b, std::min(plan.batch_size, order.size() - b));
        Tensor x = train.batch_images(rows);
        if (pad > 0) x = inject(x, s.signal);
        const auto labels = train.batch_labels(rows);
        const LossAndGrads r = plan.at_loss == AtLoss::Madry
                                   ? at_loss_madry(s.model, x, labels, attack, s.rng)
                                   : at_loss_trades(s.model, x, labels, attack, plan.trades_beta, s.rng);
        s.optimizer.step(params, r.grads);
        s.log.push_back({epoch, pass == 0 ? "step1" : "step4", b / plan.batch_size, r.loss});
      }
    }
    s.metrics.push_back(epoch_metrics(s, eval_set, plan));
    s.epoch = epoch + 1;
  }
  return s;
}

}  // namespace booster
