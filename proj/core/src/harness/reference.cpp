#include "booster/harness/reference.hpp"

#include <algorithm>
#include <cmath>

#include "booster/errors.hpp"

namespace booster::reference {

Vec to_double(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

Vec relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Vec tanh(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Vec clamp(const Vec& x, double lo, double hi) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(hi, std::max(lo, x[i]));
  return y;
}

Vec sign(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] > 0.0) - (x[i] < 0.0);
  return y;
}

Shape conv2d_shape(const Shape& xs, const Shape& ks, std::size_t stride, std::size_t pad) {
  return Shape{xs[0], ks[0], (xs[2] + 2 * pad - ks[2]) / stride + 1, (xs[3] + 2 * pad - ks[3]) / stride + 1};
}

Vec conv2d(const Vec& x, const Shape& xs, const Vec& k, const Shape& ks, const Vec& b, std::size_t stride,
           std::size_t pad) {
  const Shape os = conv2d_shape(xs, ks, stride, pad);
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t o = ks[0], kh = ks[2], kw = ks[3], ho = os[2], wo = os[3];
  Vec y(os.numel());
  for (std::size_t bi = 0; bi < n; ++bi) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = b[oc];
          for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += x[((bi * c + ci) * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] *
                       k[((oc * c + ci) * kh + ky) * kw + kx];
              }
            }
          }
          y[((bi * o + oc) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
  return y;
}

Vec maxpool2d(const Vec& x, const Shape& xs, std::size_t window) {
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t ho = h / window, wo = w / window;
  Vec y(planes * ho * wo);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            m = std::max(m, x[(p * h + oy * window + dy) * w + ox * window + dx]);
          }
        }
        y[(p * ho + oy) * wo + ox] = m;
      }
    }
  }
  return y;
}

Vec affine(const Vec& x, std::size_t n, std::size_t d, const Vec& w, std::size_t o, const Vec& b) {
  Vec y(n * o);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < o; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < d; ++i) acc += x[r * d + i] * w[j * d + i];
      y[r * o + j] = acc;
    }
  }
  return y;
}

namespace {

double log_sum_exp(const double* z, std::size_t k) {
  double m = z[0];
  for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - m);
  return m + std::log(s);
}

}  // namespace

Vec cross_entropy_rows(const Vec& z, std::size_t n, std::size_t k, std::span<const int> labels) {
  Vec out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[r] = log_sum_exp(z.data() + r * k, k) - z[r * k + static_cast<std::size_t>(labels[r])];
  }
  return out;
}

Vec kl_rows(const Vec& p, const Vec& q, std::size_t n, std::size_t k) {
  Vec out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double lp = log_sum_exp(p.data() + r * k, k), lq = log_sum_exp(q.data() + r * k, k);
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double logp = p[r * k + j] - lp, logq = q[r * k + j] - lq;
      acc += std::exp(logp) * (logp - logq);
    }
    out[r] = acc;
  }
  return out;
}

Vec logit_margin_rows(const Vec& z, std::size_t n, std::size_t k, std::span<const int> labels, double kappa) {
  Vec out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    double other = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != y) other = std::max(other, z[r * k + j]);
    }
    out[r] = std::max(z[r * k + y] - other, -kappa);
  }
  return out;
}

Vec inject(const Vec& images, const Shape& is, const Vec& frame, std::size_t width) {
  const std::size_t n = is[0], c = is[1], h = is[2], w = is[3];
  const std::size_t fh = h + 2 * width, fw = w + 2 * width;
  Vec out(n * c * fh * fw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t y = 0; y < fh; ++y) {
        for (std::size_t x = 0; x < fw; ++x) {
          const bool inside = y >= width && y < width + h && x >= width && x < width + w;
          out[((b * c + ci) * fh + y) * fw + x] =
              inside ? images[((b * c + ci) * h + (y - width)) * w + (x - width)] : frame[(ci * fh + y) * fw + x];
        }
      }
    }
  }
  return out;
}

double total(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Vec model_logits(const Model& model, const Vec& x, std::size_t n) {
  Vec h = x;
  Shape s{n, model.input_shape()[0], model.input_shape()[1], model.input_shape()[2]};
  std::size_t next = 0;
  const auto& params = model.params();
  for (const LayerSpec& l : model.layers()) {
    switch (l.kind) {
      case LayerKind::Conv: {
        const Tensor& k = params[next].value;
        h = conv2d(h, s, to_double(k), k.shape(), to_double(params[next + 1].value), l.stride, l.padding);
        s = conv2d_shape(s, k.shape(), l.stride, l.padding);
        next += 2;
        break;
      }
      case LayerKind::Relu:
        h = relu(h);
        break;
      case LayerKind::MaxPool:
        h = maxpool2d(h, s, l.window);
        s = Shape{s[0], s[1], s[2] / l.window, s[3] / l.window};
        break;
      case LayerKind::Flatten:
        s = Shape{n, h.size() / n};
        break;
      case LayerKind::Affine: {
        if (s.rank() != 2) s = Shape{n, h.size() / n};
        const Tensor& w = params[next].value;
        h = affine(h, n, s[1], to_double(w), w.shape()[0], to_double(params[next + 1].value));
        s = Shape{n, w.shape()[0]};
        next += 2;
        break;
      }
    }
  }
  return h;
}

double model_loss(const Model& model, const Vec& x, std::size_t n, std::span<const int> labels) {
  return total(cross_entropy_rows(model_logits(model, x, n), n, model.num_classes(), labels));
}

}  // namespace booster::reference
