#include "booster/harness/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "booster/autodiff/gradcheck.hpp"
#include "booster/autodiff/ops.hpp"
#include "booster/errors.hpp"
#include "booster/random.hpp"

namespace booster::harness {
namespace {

using reference::Vec;

struct Eval {
  std::uint64_t signature = 0;
  Shape out_shape;
};

// Records op(inputs) on a fresh graph and returns its branch signature.
Eval eval_f32(const GradCase& c, const std::vector<Tensor>& inputs) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const Tensor& t : inputs) vars.push_back(g.borrow(t));
  ad::Var y = c.build(vars);
  return {g.branch_signature(), y.shape()};
}

double projected_reference(const GradCase& c, const std::vector<Tensor>& inputs, const Vec& r) {
  std::vector<Vec> in;
  in.reserve(inputs.size());
  for (const Tensor& t : inputs) in.push_back(reference::to_double(t));
  const Vec y = c.reference(in);
  if (y.size() != r.size()) throw ShapeError(c.name + ": oracle output size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
  return s;
}

bool differentiates(const GradCase& c, std::size_t i) { return c.wrt.empty() || c.wrt[i]; }

}  // namespace

GradCheckResult gradient_check(const GradCase& c, const GradCheckOptions& opts) {
  Rng rng(opts.seed);
  GradCheckResult res;
  std::size_t attempts = 0;
  while (res.points < opts.points) {
    if (attempts++ >= opts.max_attempts) {
      throw NumericalError(c.name + ": no kink-free point found after " + std::to_string(opts.max_attempts) +
                           " draws");
    }
    std::vector<Tensor> inputs;
    for (const Shape& s : c.shapes) inputs.push_back(uniform_tensor(s, c.lo, c.hi, rng));
    const Eval center = eval_f32(c, inputs);
    const Tensor r = normal_tensor(center.out_shape, rng);

    // Analytic gradients of sum(r * y).
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(g.borrow(inputs[i], differentiates(c, i)));
    ad::Var loss = ad::sum(ad::mul(c.build(vars), g.borrow(r)));
    g.backward(loss);

    const Vec rd = reference::to_double(r);
    std::vector<float> analytic, numeric;
    bool crossed = false;
    for (std::size_t i = 0; i < inputs.size() && !crossed; ++i) {
      if (!differentiates(c, i)) continue;
      const Tensor& gi = g.grad(vars[i]);
      for (std::size_t k = 0; k < inputs[i].size() && !crossed; ++k) {
        const float x = inputs[i][k];
        const float xp = x + opts.h, xm = x - opts.h;
        inputs[i][k] = xp;
        const bool same_p = eval_f32(c, inputs).signature == center.signature;
        const double fp = projected_reference(c, inputs, rd);
        inputs[i][k] = xm;
        const bool same_m = eval_f32(c, inputs).signature == center.signature;
        const double fm = projected_reference(c, inputs, rd);
        inputs[i][k] = x;
        crossed = !same_p || !same_m;
        analytic.push_back(gi[k]);
        numeric.push_back(static_cast<float>((fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm))));
      }
    }
    if (crossed) {
      ++res.rejected;
      continue;
    }
    res.worst = std::max(res.worst, ad::relative_error(analytic, numeric));
    ++res.points;
  }
  return res;
}

GradCheckResult input_gradient_check(const Model& shape_template, std::size_t coords, const GradCheckOptions& opts) {
  Rng rng(opts.seed);
  Model model = shape_template;
  const Shape& is = model.input_shape();
  const Shape batch_shape{1, is[0], is[1], is[2]};
  const std::size_t d = batch_shape.numel();
  GradCheckResult res;
  std::size_t attempts = 0;

  const auto signature = [&](const Tensor& x) {
    ad::Graph g;
    (void)model.forward(g, g.borrow(x));
    return g.branch_signature();
  };

  while (res.points < opts.points) {
    if (attempts++ >= opts.max_attempts) {
      throw NumericalError("input gradient: no kink-free point found after " + std::to_string(opts.max_attempts) +
                           " draws");
    }
    model.init_he_uniform(rng());
    for (NamedTensor& p : model.params()) {
      if (p.value.shape().rank() == 1) p.value = uniform_tensor(p.value.shape(), -0.1f, 0.1f, rng);
    }
    Tensor x = uniform_tensor(batch_shape, 0.0f, 1.0f, rng);
    const std::vector<int> y{static_cast<int>(rng() % model.num_classes())};
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (coords != 0 && coords < d) {
      const auto perm = permutation(d, rng);
      idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(coords));
    }

    const Tensor g = input_gradient(model, x, y);
    const std::uint64_t center = signature(x);
    std::vector<float> analytic, numeric;
    bool crossed = false;
    for (std::size_t k : idx) {
      const float v = x[k];
      const float xp = v + opts.h, xm = v - opts.h;
      x[k] = xp;
      crossed = signature(x) != center;
      const double fp = reference::model_loss(model, reference::to_double(x), 1, y);
      x[k] = xm;
      crossed = crossed || signature(x) != center;
      const double fm = reference::model_loss(model, reference::to_double(x), 1, y);
      x[k] = v;
      if (crossed) break;
      analytic.push_back(g[k]);
      numeric.push_back(static_cast<float>((fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm))));
    }
    if (crossed) {
      ++res.rejected;
      continue;
    }
    res.worst = std::max(res.worst, ad::relative_error(analytic, numeric));
    ++res.points;
  }
  return res;
}

CheckOutcome grad_outcome(const GradCheckResult& r, const GradCheckOptions& opts) {
  CheckOutcome o;
  o.measured = r.worst;
  o.threshold = opts.tolerance;
  o.passed = r.points >= opts.points && r.worst < opts.tolerance;
  o.detail = std::to_string(r.points) + " points, " + std::to_string(r.rejected) + " kink draws resampled";
  return o;
}

std::vector<GradCase> primitive_cases() {
  namespace R = reference;
  using V = std::span<const ad::Var>;
  using D = std::span<const Vec>;
  const Shape s234{2, 3, 4};
  std::vector<GradCase> cases;

  const auto elementwise = [&](std::string name, std::function<ad::Var(ad::Var)> f,
                               std::function<double(double)> ref, float lo = -1.0f, float hi = 1.0f) {
    GradCase c;
    c.name = std::move(name);
    c.shapes = {s234};
    c.lo = lo;
    c.hi = hi;
    c.build = [f](V v) { return f(v[0]); };
    c.reference = [ref](D in) {
      Vec y(in[0].size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = ref(in[0][i]);
      return y;
    };
    cases.push_back(std::move(c));
  };

  cases.push_back({"add", {s234, s234}, {}, -1.0f, 1.0f, [](V v) { return ad::add(v[0], v[1]); },
                   [](D in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] + in[1][i];
                     return y;
                   }});
  cases.push_back({"sub", {s234, s234}, {}, -1.0f, 1.0f, [](V v) { return ad::sub(v[0], v[1]); },
                   [](D in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] - in[1][i];
                     return y;
                   }});
  cases.push_back({"mul", {s234, s234}, {}, -1.0f, 1.0f, [](V v) { return ad::mul(v[0], v[1]); },
                   [](D in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) y[i] = in[0][i] * in[1][i];
                     return y;
                   }});
  elementwise("scale", [](ad::Var x) { return ad::scale(x, 1.75f); }, [](double x) { return 1.75 * x; });
  elementwise("add_scalar", [](ad::Var x) { return ad::add_scalar(x, 0.3f); }, [](double x) { return x + 0.3; });
  elementwise("relu", [](ad::Var x) { return ad::relu(x); }, [](double x) { return x > 0.0 ? x : 0.0; });
  elementwise("tanh", [](ad::Var x) { return ad::tanh(x); }, [](double x) { return std::tanh(x); }, -2.0f, 2.0f);
  elementwise("clamp", [](ad::Var x) { return ad::clamp(x, -0.5f, 0.5f); },
              [](double x) { return std::clamp(x, -0.5, 0.5); });
  elementwise("sign", [](ad::Var x) { return ad::sign(x); }, [](double x) { return double((x > 0) - (x < 0)); });

  cases.push_back({"sum", {s234}, {}, -1.0f, 1.0f, [](V v) { return ad::sum(v[0]); },
                   [](D in) { return Vec{R::total(in[0])}; }});
  cases.push_back({"mean", {s234}, {}, -1.0f, 1.0f, [](V v) { return ad::mean(v[0]); },
                   [](D in) { return Vec{R::total(in[0]) / static_cast<double>(in[0].size())}; }});
  cases.push_back({"reshape", {s234}, {}, -1.0f, 1.0f, [](V v) { return ad::reshape(v[0], Shape{4, 6}); },
                   [](D in) { return in[0]; }});
  cases.push_back({"flatten", {Shape{2, 3, 2, 2}}, {}, -1.0f, 1.0f, [](V v) { return ad::flatten(v[0]); },
                   [](D in) { return in[0]; }});

  const auto conv_case = [&](std::string name, Shape xs, Shape ks, std::size_t stride, std::size_t pad) {
    GradCase c;
    c.name = std::move(name);
    c.shapes = {xs, ks, Shape{ks[0]}};
    c.build = [stride, pad](V v) { return ad::conv2d(v[0], v[1], v[2], {stride, pad}); };
    c.reference = [xs, ks, stride, pad](D in) { return R::conv2d(in[0], xs, in[1], ks, in[2], stride, pad); };
    cases.push_back(std::move(c));
  };
  conv_case("conv2d", Shape{2, 2, 5, 5}, Shape{3, 2, 3, 3}, 1, 0);
  conv_case("conv2d_pad1_stride2", Shape{2, 2, 6, 5}, Shape{3, 2, 3, 3}, 2, 1);

  const auto pool_case = [&](std::string name, Shape xs, std::size_t window) {
    GradCase c;
    c.name = std::move(name);
    c.shapes = {xs};
    c.build = [window](V v) { return ad::maxpool2d(v[0], window); };
    c.reference = [xs, window](D in) { return R::maxpool2d(in[0], xs, window); };
    cases.push_back(std::move(c));
  };
  pool_case("maxpool2d", Shape{2, 2, 5, 4}, 2);
  pool_case("maxpool2d_w3", Shape{1, 2, 6, 7}, 3);

  cases.push_back({"affine", {Shape{3, 5}, Shape{4, 5}, Shape{4}}, {}, -1.0f, 1.0f,
                   [](V v) { return ad::affine(v[0], v[1], v[2]); },
                   [](D in) { return R::affine(in[0], 3, 5, in[1], 4, in[2]); }});

  static const std::vector<int> labels{0, 2, 4, 1};
  const Shape zs{4, 5};
  cases.push_back({"cross_entropy_mean", {zs}, {}, -3.0f, 3.0f,
                   [](V v) { return ad::softmax_cross_entropy(v[0], labels, ad::Reduction::Mean); },
                   [](D in) { return Vec{R::total(R::cross_entropy_rows(in[0], 4, 5, labels)) / 4.0}; }});
  cases.push_back({"cross_entropy_sum", {zs}, {}, -3.0f, 3.0f,
                   [](V v) { return ad::softmax_cross_entropy(v[0], labels, ad::Reduction::Sum); },
                   [](D in) { return Vec{R::total(R::cross_entropy_rows(in[0], 4, 5, labels))}; }});
  cases.push_back({"cross_entropy_rows", {zs}, {}, -3.0f, 3.0f,
                   [](V v) { return ad::softmax_cross_entropy(v[0], labels, ad::Reduction::None); },
                   [](D in) { return R::cross_entropy_rows(in[0], 4, 5, labels); }});
  cases.push_back({"kl_divergence", {zs, zs}, {}, -2.0f, 2.0f,
                   [](V v) { return ad::kl_divergence(v[0], v[1], ad::Reduction::Mean); },
                   [](D in) { return Vec{R::total(R::kl_rows(in[0], in[1], 4, 5)) / 4.0}; }});
  cases.push_back({"kl_divergence_rows", {zs, zs}, {}, -2.0f, 2.0f,
                   [](V v) { return ad::kl_divergence(v[0], v[1], ad::Reduction::None); },
                   [](D in) { return R::kl_rows(in[0], in[1], 4, 5); }});
  cases.push_back({"logit_margin", {zs}, {}, -3.0f, 3.0f, [](V v) { return ad::logit_margin(v[0], labels, 0.0f); },
                   [](D in) { return R::logit_margin_rows(in[0], 4, 5, labels, 0.0); }});
  cases.push_back({"logit_margin_kappa", {zs}, {}, -3.0f, 3.0f,
                   [](V v) { return ad::logit_margin(v[0], labels, 0.5f); },
                   [](D in) { return R::logit_margin_rows(in[0], 4, 5, labels, 0.5); }});

  const Shape is{2, 1, 3, 3};
  cases.push_back({"inject", {is, Shape{1, 5, 5}}, {}, 0.0f, 1.0f, [](V v) { return ad::inject(v[0], v[1], 1); },
                   [is](D in) { return R::inject(in[0], is, in[1], 1); }});
  return cases;
}

}  // namespace booster::harness
