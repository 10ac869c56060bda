#include "booster/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "booster/errors.hpp"

namespace booster::ad {
namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

void require_rank(Var v, std::size_t rank, const char* op) {
  if (v.shape().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + v.shape().str());
  }
}

Graph& graph_of(Var v) {
  if (v.graph == nullptr) throw ShapeError("variable is not attached to a graph");
  return *v.graph;
}

template <typename Fn>
Tensor map_values(const Tensor& x, Fn fn) {
  Tensor out(x.shape());
  const float* src = x.ptr();
  float* dst = out.ptr();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* op) {
  if (labels.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                     " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " + std::to_string(classes) +
                        ")");
    }
  }
}

// Order-sensitive mix of per-element branch codes; wraps, loop vectorizes.
class BranchHash {
 public:
  void add(std::size_t i, std::uint64_t code) { h_ += (code + 1) * ((i + 1) * 0x9e3779b97f4a7c15ULL); }
  [[nodiscard]] std::uint64_t value() const { return h_ | 1; }

 private:
  std::uint64_t h_ = 0;
};

// Output columns ox whose input column ox*stride + k - pad lies inside [0, w).
struct ColSpan {
  std::size_t lo, hi;
};

ColSpan valid_span(std::size_t k, std::size_t pad, std::size_t stride, std::size_t w, std::size_t wo) {
  std::size_t lo = 0;
  while (lo < wo && lo * stride + k < pad) ++lo;
  std::size_t hi = lo;
  while (hi < wo && hi * stride + k < pad + w) ++hi;
  return {lo, hi};
}

// Row-wise log-softmax in double precision.
std::vector<double> log_softmax_rows(const Tensor& logits) {
  const std::size_t n = logits.shape()[0];
  const std::size_t k = logits.shape()[1];
  std::vector<double> out(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    const float* z = logits.ptr() + r * k;
    double zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - zmax);
    const double lse = zmax + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = z[j] - lse;
  }
  return out;
}

Tensor reduce_rows(const std::vector<double>& per_row, Reduction reduction) {
  if (reduction == Reduction::None) {
    Tensor t(Shape{per_row.size()});
    for (std::size_t i = 0; i < per_row.size(); ++i) t[i] = static_cast<float>(per_row[i]);
    return t;
  }
  double s = 0.0;
  for (double v : per_row) s += v;
  if (reduction == Reduction::Mean && !per_row.empty()) s /= static_cast<double>(per_row.size());
  return Tensor::scalar(static_cast<float>(s));
}

// Upstream gradient for row r under a reduction.
float row_weight(const Tensor& out_grad, Reduction reduction, std::size_t r, std::size_t rows) {
  switch (reduction) {
    case Reduction::None:
      return out_grad[r];
    case Reduction::Sum:
      return out_grad[0];
    case Reduction::Mean:
      return out_grad[0] / static_cast<float>(rows);
  }
  return 0.0f;
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const float* pb = b.value().ptr();
  float* po = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  return graph_of(a).record("add", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* d = ctx.input_grad(k)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const float* pb = b.value().ptr();
  float* po = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  return graph_of(a).record("sub", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    if (Tensor* d = ctx.input_grad(0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
    }
    if (Tensor* d = ctx.input_grad(1)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const float* pb = b.value().ptr();
  float* po = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  return graph_of(a).record("mul", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    if (Tensor* d = ctx.input_grad(0)) {
      const Tensor& other = ctx.input(1);
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * other[i];
    }
    if (Tensor* d = ctx.input_grad(1)) {
      const Tensor& other = ctx.input(0);
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * other[i];
    }
  });
}

Var scale(Var a, float s) {
  return graph_of(a).record("scale", map_values(a.value(), [s](float v) { return v * s; }), {a},
                            [s](const BackwardContext& ctx) {
                              const Tensor& g = ctx.out_grad();
                              Tensor* d = ctx.input_grad(0);
                              for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += s * g[i];
                            });
}

Var add_scalar(Var a, float s) {
  return graph_of(a).record("add_scalar", map_values(a.value(), [s](float v) { return v + s; }), {a},
                            [](const BackwardContext& ctx) {
                              const Tensor& g = ctx.out_grad();
                              Tensor* d = ctx.input_grad(0);
                              for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
                            });
}

Var relu(Var x) {
  const Tensor& in = x.value();
  BranchHash branch;
  for (std::size_t i = 0; i < in.size(); ++i) branch.add(i, in[i] > 0.0f);
  return graph_of(x).record(
      "relu", map_values(in, [](float v) { return v > 0.0f ? v : 0.0f; }), {x},
      [](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& in = ctx.input(0);
        Tensor* d = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in[i] > 0.0f) (*d)[i] += g[i];
        }
      },
      branch.value());
}

Var tanh(Var x) {
  return graph_of(x).record("tanh", map_values(x.value(), [](float v) { return std::tanh(v); }), {x},
                            [](const BackwardContext& ctx) {
                              const Tensor& g = ctx.out_grad();
                              const Tensor& y = ctx.output();
                              Tensor* d = ctx.input_grad(0);
                              for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * (1.0f - y[i] * y[i]);
                            });
}

Var clamp(Var x, float lo, float hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  const Tensor& in = x.value();
  BranchHash branch;
  for (std::size_t i = 0; i < in.size(); ++i) branch.add(i, (in[i] < lo) + 2 * (in[i] > hi));
  return graph_of(x).record(
      "clamp", map_values(in, [lo, hi](float v) { return std::clamp(v, lo, hi); }), {x},
      [lo, hi](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& in = ctx.input(0);
        Tensor* d = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (in[i] >= lo && in[i] <= hi) (*d)[i] += g[i];
        }
      },
      branch.value());
}

Var sign(Var x) {
  Tensor out = map_values(x.value(), [](float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
  BranchHash branch;
  for (std::size_t i = 0; i < out.size(); ++i) branch.add(i, static_cast<std::uint64_t>(out[i] + 1.0f));
  // Zero derivative almost everywhere; touching the slot still materializes it.
  return graph_of(x).record("sign", std::move(out), {x}, [](const BackwardContext& ctx) { (void)ctx.input_grad(0); },
                            branch.value());
}

Var sum(Var x) {
  double s = 0.0;
  for (float v : x.value().data()) s += v;
  return graph_of(x).record("sum", Tensor::scalar(static_cast<float>(s)), {x}, [](const BackwardContext& ctx) {
    const float g = ctx.out_grad()[0];
    Tensor* d = ctx.input_grad(0);
    for (float& v : d->data()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (float v : x.value().data()) s += v;
  return graph_of(x).record("mean", Tensor::scalar(static_cast<float>(s / static_cast<double>(n))), {x},
                            [n](const BackwardContext& ctx) {
                              const float g = ctx.out_grad()[0] / static_cast<float>(n);
                              Tensor* d = ctx.input_grad(0);
                              for (float& v : d->data()) v += g;
                            });
}

Var reshape(Var x, Shape shape) {
  return graph_of(x).record("reshape", x.value().reshaped(std::move(shape)), {x}, [](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* d = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
  });
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.rank() < 1) throw ShapeError("flatten: rank-0 input");
  const std::size_t n = s[0];
  return reshape(x, Shape{n, n == 0 ? 0 : x.value().size() / n});
}

Var conv2d(Var x, Var kernels, Var bias, Conv2dOptions opts) {
  require_rank(x, 4, "conv2d");
  require_rank(kernels, 4, "conv2d kernels");
  require_rank(bias, 1, "conv2d bias");
  const Shape& xs = x.shape();
  const Shape& ks = kernels.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t o = ks[0], kh = ks[2], kw = ks[3];
  const std::size_t stride = opts.stride, pad = opts.padding;
  if (ks[1] != c) throw ShapeError("conv2d: kernel channels " + ks.str() + " vs input " + xs.str());
  if (bias.shape()[0] != o) throw ShapeError("conv2d: bias length mismatch");
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (h + 2 * pad < kh || w + 2 * pad < kw) throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t ckk = c * kh * kw;
  const std::size_t hw_out = ho * wo;

  // im2col buffer laid out ckk x (n*hw_out) so the whole batch is one GEMM; kept for backward.
  const std::size_t cols_n = n * hw_out;
  auto cols = std::make_shared<std::vector<float>>(ckk * cols_n);
  const float* px = x.value().ptr();
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const ColSpan xs_ = valid_span(kx, pad, stride, w, wo);
        float* row = cols->data() + ((ci * kh + ky) * kw + kx) * cols_n;
        for (std::size_t b = 0; b < n; ++b) {
          const float* img = px + (b * c + ci) * h * w;
          float* dst = row + b * hw_out;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            float* line = dst + oy * wo;
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
              std::fill(line, line + wo, 0.0f);
              continue;
            }
            std::fill(line, line + xs_.lo, 0.0f);
            std::fill(line + xs_.hi, line + wo, 0.0f);
            // Index of the input column for ox = 0; negative when padding is in play.
            const std::ptrdiff_t base = iy * static_cast<std::ptrdiff_t>(w) + static_cast<std::ptrdiff_t>(kx) -
                                        static_cast<std::ptrdiff_t>(pad);
            for (std::size_t ox = xs_.lo; ox < xs_.hi; ++ox) {
              line[ox] = img[base + static_cast<std::ptrdiff_t>(ox * stride)];
            }
          }
        }
      }
    }
  }

  const auto eo = static_cast<Eigen::Index>(o);
  const auto eckk = static_cast<Eigen::Index>(ckk);
  const auto ecn = static_cast<Eigen::Index>(cols_n);
  MatR prod(eo, ecn);
  prod.noalias() = CMapR(kernels.value().ptr(), eo, eckk) * CMapR(cols->data(), eckk, ecn);
  Tensor out(Shape{n, o, ho, wo});
  const float* pb = bias.value().ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      const float* src = prod.data() + oc * cols_n + b * hw_out;
      float* dst = out.ptr() + (b * o + oc) * hw_out;
      for (std::size_t p = 0; p < hw_out; ++p) dst[p] = src[p] + pb[oc];
    }
  }

  auto backward = [=](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* dx = ctx.input_grad(0);
    Tensor* dk = ctx.input_grad(1);
    Tensor* db = ctx.input_grad(2);
    // Regroup the output gradient to o x (n*hw_out).
    MatR gmat(eo, ecn);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t oc = 0; oc < o; ++oc) {
        const float* src = g.ptr() + (b * o + oc) * hw_out;
        std::copy(src, src + hw_out, gmat.data() + oc * cols_n + b * hw_out);
      }
    }
    CMapR col(cols->data(), eckk, ecn);
    if (dk) MapR(dk->ptr(), eo, eckk).noalias() += gmat * col.transpose();
    if (db) {
      for (std::size_t oc = 0; oc < o; ++oc) (*db)[oc] += gmat.row(static_cast<Eigen::Index>(oc)).sum();
    }
    if (!dx) return;
    MatR dcol(eckk, ecn);
    dcol.noalias() = CMapR(ctx.input(1).ptr(), eo, eckk).transpose() * gmat;
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const ColSpan xs_ = valid_span(kx, pad, stride, w, wo);
          const float* row = dcol.data() + ((ci * kh + ky) * kw + kx) * cols_n;
          for (std::size_t b = 0; b < n; ++b) {
            float* img = dx->ptr() + (b * c + ci) * h * w;
            const float* srcb = row + b * hw_out;
            for (std::size_t oy = 0; oy < ho; ++oy) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              const std::ptrdiff_t base = iy * static_cast<std::ptrdiff_t>(w) + static_cast<std::ptrdiff_t>(kx) -
                                          static_cast<std::ptrdiff_t>(pad);
              const float* line = srcb + oy * wo;
              for (std::size_t ox = xs_.lo; ox < xs_.hi; ++ox) {
                img[base + static_cast<std::ptrdiff_t>(ox * stride)] += line[ox];
              }
            }
          }
        }
      }
    }
  };
  return graph_of(x).record("conv2d", std::move(out), {x, kernels, bias}, std::move(backward));
}

Var maxpool2d(Var x, std::size_t window) {
  require_rank(x, 4, "maxpool2d");
  if (window == 0) throw ConfigError("maxpool2d: window must be positive");
  const Shape& xs = x.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t ho = h / window, wo = w / window;
  if (ho == 0 || wo == 0) throw ShapeError("maxpool2d: window larger than input " + xs.str());

  Tensor out(Shape{n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  BranchHash branch;
  const float* px = x.value().ptr();
  std::size_t k = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* src = px + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++k) {
        std::size_t best_idx = oy * window * w + ox * window;
        float best = src[best_idx];
        for (std::size_t dy = 0; dy < window; ++dy) {
          const float* line = src + (oy * window + dy) * w + ox * window;
          for (std::size_t dx = 0; dx < window; ++dx) {
            if (line[dx] > best) {
              best = line[dx];
              best_idx = (oy * window + dy) * w + ox * window + dx;
            }
          }
        }
        out[k] = best;
        (*argmax)[k] = static_cast<std::uint32_t>(plane * h * w + best_idx);
        branch.add(k, best_idx);
      }
    }
  }
  return graph_of(x).record(
      "maxpool2d", std::move(out), {x},
      [argmax](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        Tensor* d = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[(*argmax)[i]] += g[i];
      },
      branch.value());
}

Var affine(Var x, Var weight, Var bias) {
  require_rank(x, 2, "affine");
  require_rank(weight, 2, "affine weight");
  require_rank(bias, 1, "affine bias");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  const std::size_t o = weight.shape()[0];
  if (weight.shape()[1] != d) throw ShapeError("affine: weight " + weight.shape().str() + " vs input " + x.shape().str());
  if (bias.shape()[0] != o) throw ShapeError("affine: bias length mismatch");
  const auto en = static_cast<Eigen::Index>(n), ed = static_cast<Eigen::Index>(d), eo = static_cast<Eigen::Index>(o);

  Tensor out(Shape{n, o});
  MapR dst(out.ptr(), en, eo);
  dst.noalias() = CMapR(x.value().ptr(), en, ed) * CMapR(weight.value().ptr(), eo, ed).transpose();
  Eigen::Map<const Eigen::RowVectorXf> b(bias.value().ptr(), eo);
  dst.rowwise() += b;

  return graph_of(x).record("affine", std::move(out), {x, weight, bias}, [=](const BackwardContext& ctx) {
    CMapR g(ctx.out_grad().ptr(), en, eo);
    if (Tensor* dx = ctx.input_grad(0)) {
      MapR(dx->ptr(), en, ed).noalias() += g * CMapR(ctx.input(1).ptr(), eo, ed);
    }
    if (Tensor* dw = ctx.input_grad(1)) {
      MapR(dw->ptr(), eo, ed).noalias() += g.transpose() * CMapR(ctx.input(0).ptr(), en, ed);
    }
    if (Tensor* db = ctx.input_grad(2)) {
      Eigen::Map<Eigen::RowVectorXf>(db->ptr(), eo) += g.colwise().sum();
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels, Reduction reduction) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  check_labels(labels, n, k, "softmax_cross_entropy");
  auto logp = std::make_shared<std::vector<double>>(log_softmax_rows(logits.value()));
  std::vector<double> per_row(n);
  for (std::size_t r = 0; r < n; ++r) per_row[r] = -(*logp)[r * k + static_cast<std::size_t>(labels[r])];
  std::vector<int> ys(labels.begin(), labels.end());

  return graph_of(logits).record(
      "softmax_cross_entropy", reduce_rows(per_row, reduction), {logits},
      [logp, ys = std::move(ys), n, k, reduction](const BackwardContext& ctx) {
        Tensor* d = ctx.input_grad(0);
        for (std::size_t r = 0; r < n; ++r) {
          const double wr = row_weight(ctx.out_grad(), reduction, r, n);
          for (std::size_t j = 0; j < k; ++j) {
            double p = std::exp((*logp)[r * k + j]);
            if (static_cast<int>(j) == ys[r]) p -= 1.0;
            (*d)[r * k + j] += static_cast<float>(wr * p);
          }
        }
      });
}

Var kl_divergence(Var p_logits, Var q_logits, Reduction reduction) {
  require_rank(p_logits, 2, "kl_divergence");
  require_same_shape(p_logits, q_logits, "kl_divergence");
  const std::size_t n = p_logits.shape()[0], k = p_logits.shape()[1];
  auto logp = std::make_shared<std::vector<double>>(log_softmax_rows(p_logits.value()));
  auto logq = std::make_shared<std::vector<double>>(log_softmax_rows(q_logits.value()));
  auto per_row = std::make_shared<std::vector<double>>(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double lp = (*logp)[r * k + j];
      s += std::exp(lp) * (lp - (*logq)[r * k + j]);
    }
    (*per_row)[r] = std::max(s, 0.0);
  }
  return graph_of(p_logits).record(
      "kl_divergence", reduce_rows(*per_row, reduction), {p_logits, q_logits},
      [=](const BackwardContext& ctx) {
        Tensor* dp = ctx.input_grad(0);
        Tensor* dq = ctx.input_grad(1);
        for (std::size_t r = 0; r < n; ++r) {
          const double wr = row_weight(ctx.out_grad(), reduction, r, n);
          double kl_row = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            const double lp = (*logp)[r * k + j];
            kl_row += std::exp(lp) * (lp - (*logq)[r * k + j]);
          }
          for (std::size_t j = 0; j < k; ++j) {
            const double lp = (*logp)[r * k + j];
            const double lq = (*logq)[r * k + j];
            const double p = std::exp(lp);
            if (dp) (*dp)[r * k + j] += static_cast<float>(wr * p * (lp - lq - kl_row));
            if (dq) (*dq)[r * k + j] += static_cast<float>(wr * (std::exp(lq) - p));
          }
        }
      });
}

Var logit_margin(Var logits, std::span<const int> labels, float kappa) {
  require_rank(logits, 2, "logit_margin");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (k < 2) throw ShapeError("logit_margin: needs at least two classes");
  check_labels(labels, n, k, "logit_margin");
  const Tensor& z = logits.value();
  Tensor out(Shape{n});
  // Per row: index of the strongest competing class, or k when the margin is clipped at -kappa.
  auto active = std::make_shared<std::vector<std::size_t>>(n, k);
  BranchHash branch;
  for (std::size_t r = 0; r < n; ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    std::size_t best = y == 0 ? 1 : 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != y && z[r * k + j] > z[r * k + best]) best = j;
    }
    const float m = z[r * k + y] - z[r * k + best];
    if (m > -kappa) {
      out[r] = m;
      (*active)[r] = best;
    } else {
      out[r] = -kappa;
    }
    branch.add(r, (*active)[r]);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return graph_of(logits).record(
      "logit_margin", std::move(out), {logits},
      [active, ys = std::move(ys), n, k](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        Tensor* d = ctx.input_grad(0);
        for (std::size_t r = 0; r < n; ++r) {
          if ((*active)[r] == k) continue;
          (*d)[r * k + static_cast<std::size_t>(ys[r])] += g[r];
          (*d)[r * k + (*active)[r]] -= g[r];
        }
      },
      branch.value());
}

Var inject(Var images, Var frame, std::size_t width) {
  require_rank(images, 4, "inject");
  require_rank(frame, 3, "inject frame");
  const Shape& is = images.shape();
  const Shape& fs = frame.shape();
  const std::size_t n = is[0], c = is[1], h = is[2], w = is[3];
  const std::size_t fh = h + 2 * width, fw = w + 2 * width;
  if (fs[0] != c) throw ShapeError("inject: frame channels " + fs.str() + " vs images " + is.str());
  if (fs[1] != fh || fs[2] != fw) throw ShapeError("inject: frame " + fs.str() + " does not fit width " + std::to_string(width));

  Tensor out(Shape{n, c, fh, fw});
  const float* pf = frame.value().ptr();
  const float* px = images.value().ptr();
  float* po = out.ptr();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      float* dst = po + (b * c + ci) * fh * fw;
      std::copy_n(pf + ci * fh * fw, fh * fw, dst);
      const float* src = px + (b * c + ci) * h * w;
      for (std::size_t y = 0; y < h; ++y) std::copy_n(src + y * w, w, dst + (y + width) * fw + width);
    }
  }
  return graph_of(images).record("inject", std::move(out), {images, frame}, [=](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    if (Tensor* dx = ctx.input_grad(0)) {
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ci = 0; ci < c; ++ci) {
          const float* src = g.ptr() + (b * c + ci) * fh * fw;
          float* dst = dx->ptr() + (b * c + ci) * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) dst[y * w + x] += src[(y + width) * fw + x + width];
          }
        }
      }
    }
    if (Tensor* df = ctx.input_grad(1)) {
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ci = 0; ci < c; ++ci) {
          const float* src = g.ptr() + (b * c + ci) * fh * fw;
          float* dst = df->ptr() + ci * fh * fw;
          for (std::size_t y = 0; y < fh; ++y) {
            const bool row_inside = y >= width && y < width + h;
            for (std::size_t x = 0; x < fw; ++x) {
              if (row_inside && x >= width && x < width + w) continue;
              dst[y * fw + x] += src[y * fw + x];
            }
          }
        }
      }
    }
  });
}

}  // namespace booster::ad
