#include "ftscope/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "ftscope/error.hpp"
#include "ftscope/fft.hpp"

namespace ftscope::ops {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank, const char* layout) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected " + layout + ", got " + shape_str(a.shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& in, F f) {
  Tensor out(in.shape());
  auto o = out.mutable_data();
  auto x = in.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(x[i]);
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return a.tape()->record(std::move(out), {a, b},
                          [](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
                            if (needs[0]) grads[0] = g;
                            if (needs[1]) grads[1] = g;
                          },
                          "add");
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return a.tape()->record(std::move(out), {a, b},
                          [](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
                            if (needs[0]) grads[0] = g;
                            if (needs[1]) grads[1] = map_values(g, [](double v) { return -v; });
                          },
                          "sub");
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto o = out.mutable_data();
  const Tensor av = a.value(), bv = b.value();
  auto x = av.data(), y = bv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return a.tape()->record(
      std::move(out), {a, b},
      [av, bv](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
        auto gd = g.data();
        if (needs[0]) {
          Tensor d(av.shape());
          auto dd = d.mutable_data();
          for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = gd[i] * bv[i];
          grads[0] = std::move(d);
        }
        if (needs[1]) {
          Tensor d(bv.shape());
          auto dd = d.mutable_data();
          for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = gd[i] * av[i];
          grads[1] = std::move(d);
        }
      },
      "mul");
}

Var scale(Var a, double factor) {
  Tensor out = map_values(a.value(), [factor](double v) { return v * factor; });
  return a.tape()->record(std::move(out), {a},
                          [factor](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            grads[0] = map_values(g, [factor](double v) { return v * factor; });
                          },
                          "scale");
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw ShapeError("weighted_sum: need one weight per term and at least one term");
  }
  for (const Var& t : terms) require_same_shape("weighted_sum", terms[0], t);
  Tensor out(terms[0].shape());
  auto o = out.mutable_data();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    auto x = terms[k].value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += weights[k] * x[i];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return terms[0].tape()->record(
      std::move(out), std::vector<Var>(terms.begin(), terms.end()),
      [w](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
        for (std::size_t k = 0; k < w.size(); ++k) {
          if (!needs[k]) continue;
          const double wk = w[k];
          grads[k] = map_values(g, [wk](double v) { return v * wk; });
        }
      },
      "weighted_sum");
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Shape in_shape = a.shape();
  return a.tape()->record(Tensor::scalar(s), {a},
                          [in_shape](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            grads[0] = Tensor::full(in_shape, g[0]);
                          },
                          "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Shape in_shape = a.shape();
  return a.tape()->record(Tensor::scalar(s / n), {a},
                          [in_shape, n](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            grads[0] = Tensor::full(in_shape, g[0] / n);
                          },
                          "mean");
}

Var reshape(Var a, Shape shape) {
  const Shape in_shape = a.shape();
  return a.tape()->record(a.value().reshaped(std::move(shape)), {a},
                          [in_shape](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            grads[0] = g.reshaped(in_shape);
                          },
                          "reshape");
}

Var relu(Var a) {
  const Tensor in = a.value();
  Tensor out = map_values(in, [](double v) { return v > 0.0 ? v : 0.0; });
  return a.tape()->record(std::move(out), {a},
                          [in](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            Tensor d(in.shape());
                            auto dd = d.mutable_data();
                            auto gd = g.data();
                            auto x = in.data();
                            for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = x[i] > 0.0 ? gd[i] : 0.0;
                            grads[0] = std::move(d);
                          },
                          "relu");
}

Var sigmoid(Var a) {
  Tensor out = map_values(a.value(), [](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  const Tensor y = out;
  return a.tape()->record(std::move(out), {a},
                          [y](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            Tensor d(y.shape());
                            auto dd = d.mutable_data();
                            auto gd = g.data();
                            for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = gd[i] * y[i] * (1.0 - y[i]);
                            grads[0] = std::move(d);
                          },
                          "sigmoid");
}

Var softmax(Var logits) {
  require_rank("softmax", logits, 2, "[N, K]");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  Tensor out(logits.shape());
  auto o = out.mutable_data();
  auto x = logits.value().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += (o[r * k + c] = std::exp(row[c] - m));
    for (std::size_t c = 0; c < k; ++c) o[r * k + c] /= z;
  }
  const Tensor y = out;
  return logits.tape()->record(
      std::move(out), {logits},
      [y, n, k](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
        Tensor d(y.shape());
        auto dd = d.mutable_data();
        auto gd = g.data();
        for (std::size_t r = 0; r < n; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < k; ++c) dot += gd[r * k + c] * y[r * k + c];
          for (std::size_t c = 0; c < k; ++c) dd[r * k + c] = y[r * k + c] * (gd[r * k + c] - dot);
        }
        grads[0] = std::move(d);
      },
      "softmax");
}

Var dense(Var x, Var w, Var b) {
  require_rank("dense", x, 2, "input [N, C]");
  require_rank("dense", w, 2, "weight [K, C]");
  require_rank("dense", b, 1, "bias [K]");
  const std::size_t n = x.shape()[0], c = x.shape()[1], k = w.shape()[0];
  if (w.shape()[1] != c || b.shape()[0] != k) {
    throw ShapeError("dense: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) +
                     ", bias " + shape_str(b.shape()) + " are incompatible");
  }
  const Tensor xv = x.value(), wv = w.value();
  Tensor out({n, k});
  {
    MapR o(out.mutable_data().data(), n, k);
    CMapR xm(xv.ptr(), n, c), wm(wv.ptr(), k, c);
    o.noalias() = xm * wm.transpose();
    auto bd = b.value().data();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < k; ++j) o(r, j) += bd[j];
  }
  return x.tape()->record(
      std::move(out), {x, w, b},
      [xv, wv, n, c, k](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
        CMapR gm(g.ptr(), n, k);
        if (needs[0]) {
          Tensor dx({n, c});
          MapR(dx.mutable_data().data(), n, c).noalias() = gm * CMapR(wv.ptr(), k, c);
          grads[0] = std::move(dx);
        }
        if (needs[1]) {
          Tensor dw({k, c});
          MapR(dw.mutable_data().data(), k, c).noalias() = gm.transpose() * CMapR(xv.ptr(), n, c);
          grads[1] = std::move(dw);
        }
        if (needs[2]) {
          Tensor db({k});
          auto d = db.mutable_data();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < k; ++j) d[j] += gm(r, j);
          grads[2] = std::move(db);
        }
      },
      "dense");
}

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, stride, pad, oh, ow;
  std::size_t ck() const { return c * kh * kw; }
  std::size_t p() const { return oh * ow; }
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ws, const Shape& bs, Conv2dOptions opt) {
  if (xs.size() != 4) throw ShapeError("conv2d: input must be [N, C, H, W], got " + shape_str(xs));
  if (ws.size() != 4) throw ShapeError("conv2d: kernel must be [F, C, kh, kw], got " + shape_str(ws));
  if (opt.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(ws[1]) + " input channels, input has " +
                     std::to_string(xs[1]));
  }
  if (bs.size() != 1 || bs[0] != ws[0]) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(ws[0]) + "], got " + shape_str(bs));
  }
  const std::size_t ph = xs[2] + 2 * opt.padding, pw = xs[3] + 2 * opt.padding;
  if (ws[2] > ph || ws[3] > pw) {
    throw ShapeError("conv2d: kernel " + std::to_string(ws[2]) + "x" + std::to_string(ws[3]) +
                     " exceeds padded input " + std::to_string(ph) + "x" + std::to_string(pw));
  }
  ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], opt.stride, opt.padding, 0, 0};
  g.oh = (ph - g.kh) / g.stride + 1;
  g.ow = (pw - g.kw) / g.stride + 1;
  return g;
}

// col is [C*kh*kw, N*OH*OW] row-major.
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t np = g.n * g.p();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = col + ((ci * g.kh + ky) * g.kw + kx) * np;
        for (std::size_t ni = 0; ni < g.n; ++ni) {
          const double* plane = x + (ni * g.c + ci) * g.h * g.w;
          double* dst = row + ni * g.p();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            double* d = dst + oy * g.ow;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill(d, d + g.ow, 0.0);
              continue;
            }
            const double* src = plane + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              d[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : src[ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* col, double* dx) {
  const std::size_t np = g.n * g.p();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = col + ((ci * g.kh + ky) * g.kw + kx) * np;
        for (std::size_t ni = 0; ni < g.n; ++ni) {
          double* plane = dx + (ni * g.c + ci) * g.h * g.w;
          const double* src = row + ni * g.p();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            double* d = plane + static_cast<std::size_t>(iy) * g.w;
            const double* s = src + oy * g.ow;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) d[ix] += s[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, Conv2dOptions options) {
  const ConvGeometry g = conv_geometry(x.shape(), w.shape(), b.shape(), options);
  const std::size_t ck = g.ck(), np = g.n * g.p();
  auto col = std::make_shared<std::vector<double>>(ck * np);
  im2col(g, x.value().ptr(), col->data());

  std::vector<double> out2(g.f * np);
  const Tensor wv = w.value();
  MapR(out2.data(), g.f, np).noalias() = CMapR(wv.ptr(), g.f, ck) * CMapR(col->data(), ck, np);

  Tensor out({g.n, g.f, g.oh, g.ow});
  {
    auto o = out.mutable_data();
    auto bd = b.value().data();
    const std::size_t p = g.p();
    for (std::size_t ni = 0; ni < g.n; ++ni)
      for (std::size_t fi = 0; fi < g.f; ++fi) {
        const double* src = out2.data() + fi * np + ni * p;
        double* dst = o.data() + (ni * g.f + fi) * p;
        for (std::size_t i = 0; i < p; ++i) dst[i] = src[i] + bd[fi];
      }
  }

  // The column buffer is only needed for the kernel gradient.
  if (!w.requires_grad()) col.reset();
  return x.tape()->record(
      std::move(out), {x, w, b},
      [g, col, wv](const Tensor& grad, std::span<const char> needs, std::span<Tensor> grads) {
        const std::size_t ck = g.ck(), np = g.n * g.p(), p = g.p();
        std::vector<double> gm(g.f * np);
        auto gd = grad.data();
        for (std::size_t ni = 0; ni < g.n; ++ni)
          for (std::size_t fi = 0; fi < g.f; ++fi)
            std::copy_n(gd.data() + (ni * g.f + fi) * p, p, gm.data() + fi * np + ni * p);
        CMapR G(gm.data(), g.f, np);
        if (needs[1] && col) {
          Tensor dw({g.f, g.c, g.kh, g.kw});
          MapR(dw.mutable_data().data(), g.f, ck).noalias() = G * CMapR(col->data(), ck, np).transpose();
          grads[1] = std::move(dw);
        }
        if (needs[2]) {
          Tensor db({g.f});
          auto d = db.mutable_data();
          for (std::size_t fi = 0; fi < g.f; ++fi) {
            double s = 0.0;
            for (std::size_t j = 0; j < np; ++j) s += gm[fi * np + j];
            d[fi] = s;
          }
          grads[2] = std::move(db);
        }
        if (needs[0]) {
          std::vector<double> dcol(ck * np);
          MapR(dcol.data(), ck, np).noalias() = CMapR(wv.ptr(), g.f, ck).transpose() * G;
          Tensor dx({g.n, g.c, g.h, g.w});
          col2im(g, dcol.data(), dx.mutable_data().data());
          grads[0] = std::move(dx);
        }
      },
      "conv2d");
}

Var pool2d(Var x, PoolKind kind, std::size_t size, std::size_t stride, std::size_t padding) {
  require_rank("pool2d", x, 4, "[N, C, H, W]");
  if (size < 1 || stride < 1) throw ShapeError("pool2d: size and stride must be >= 1");
  if (padding >= size) throw ShapeError("pool2d: padding must be smaller than the window");
  const Shape& xs = x.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  if (size > h + 2 * padding || size > w + 2 * padding) {
    throw ShapeError("pool2d: window " + std::to_string(size) + " exceeds padded input " +
                     std::to_string(h + 2 * padding) + "x" + std::to_string(w + 2 * padding));
  }
  const std::size_t oh = (h + 2 * padding - size) / stride + 1;
  const std::size_t ow = (w + 2 * padding - size) / stride + 1;
  Tensor out({n, c, oh, ow});
  auto o = out.mutable_data();
  auto in = x.value().data();
  // For max: flat input index of the winner. For avg: count of valid elements.
  auto aux = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = in.data() + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * stride) - static_cast<std::ptrdiff_t>(padding);
      const std::size_t ylo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
      const std::size_t yhi = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(size), static_cast<std::ptrdiff_t>(h)));
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * stride) - static_cast<std::ptrdiff_t>(padding);
        const std::size_t xlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
        const std::size_t xhi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(size), static_cast<std::ptrdiff_t>(w)));
        const std::size_t oi = (plane * oh + oy) * ow + ox;
        if (kind == PoolKind::max) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t arg = 0;
          for (std::size_t yy = ylo; yy < yhi; ++yy)
            for (std::size_t xx = xlo; xx < xhi; ++xx) {
              const double v = src[yy * w + xx];
              if (v > best) {
                best = v;
                arg = plane * h * w + yy * w + xx;
              }
            }
          o[oi] = best;
          (*aux)[oi] = arg;
        } else {
          double s = 0.0;
          for (std::size_t yy = ylo; yy < yhi; ++yy)
            for (std::size_t xx = xlo; xx < xhi; ++xx) s += src[yy * w + xx];
          const std::size_t count = (yhi - ylo) * (xhi - xlo);
          o[oi] = s / static_cast<double>(count);
          (*aux)[oi] = count;
        }
      }
    }
  }
  const Shape in_shape = xs;
  return x.tape()->record(
      std::move(out), {x},
      [=](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
        Tensor d(in_shape);
        auto dd = d.mutable_data();
        auto gd = g.data();
        if (kind == PoolKind::max) {
          for (std::size_t i = 0; i < gd.size(); ++i) dd[(*aux)[i]] += gd[i];
        } else {
          for (std::size_t plane = 0; plane < n * c; ++plane)
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const std::ptrdiff_t y0 =
                  static_cast<std::ptrdiff_t>(oy * stride) - static_cast<std::ptrdiff_t>(padding);
              const std::size_t ylo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
              const std::size_t yhi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                  y0 + static_cast<std::ptrdiff_t>(size), static_cast<std::ptrdiff_t>(h)));
              for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t x0 =
                    static_cast<std::ptrdiff_t>(ox * stride) - static_cast<std::ptrdiff_t>(padding);
                const std::size_t xlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
                const std::size_t xhi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
                    x0 + static_cast<std::ptrdiff_t>(size), static_cast<std::ptrdiff_t>(w)));
                const std::size_t oi = (plane * oh + oy) * ow + ox;
                const double share = gd[oi] / static_cast<double>((*aux)[oi]);
                double* dst = dd.data() + plane * h * w;
                for (std::size_t yy = ylo; yy < yhi; ++yy)
                  for (std::size_t xx = xlo; xx < xhi; ++xx) dst[yy * w + xx] += share;
              }
            }
        }
        grads[0] = std::move(d);
      },
      "pool2d");
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  for (const Var& p : parts) require_rank("concat_channels", p, 4, "[N, C, H, W]");
  const Shape& s0 = parts[0].shape();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw ShapeError("concat_channels: " + shape_str(s) + " incompatible with " + shape_str(s0));
    }
    widths.push_back(s[1]);
    total += s[1];
  }
  const std::size_t n = s0[0], hw = s0[2] * s0[3];
  Tensor out({n, total, s0[2], s0[3]});
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].value().data();
    for (std::size_t ni = 0; ni < n; ++ni)
      std::copy_n(src.data() + ni * widths[k] * hw, widths[k] * hw, o.data() + (ni * total + offset) * hw);
    offset += widths[k];
  }
  std::vector<Shape> shapes;
  for (const Var& p : parts) shapes.push_back(p.shape());
  return parts[0].tape()->record(
      std::move(out), std::vector<Var>(parts.begin(), parts.end()),
      [shapes, widths, n, hw, total](const Tensor& g, std::span<const char> needs, std::span<Tensor> grads) {
        auto gd = g.data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < shapes.size(); ++k) {
          if (needs[k]) {
            Tensor d(shapes[k]);
            auto dd = d.mutable_data();
            for (std::size_t ni = 0; ni < n; ++ni)
              std::copy_n(gd.data() + (ni * total + offset) * hw, widths[k] * hw, dd.data() + ni * widths[k] * hw);
            grads[k] = std::move(d);
          }
          offset += widths[k];
        }
      },
      "concat_channels");
}

Var global_avg_pool(Var x) {
  require_rank("global_avg_pool", x, 4, "[N, C, H, W]");
  const Shape in_shape = x.shape();
  const std::size_t n = in_shape[0], c = in_shape[1], hw = in_shape[2] * in_shape[3];
  Tensor out({n, c});
  auto o = out.mutable_data();
  auto in = x.value().data();
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += in[i * hw + j];
    o[i] = s / static_cast<double>(hw);
  }
  return x.tape()->record(std::move(out), {x},
                          [in_shape, n, c, hw](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            Tensor d(in_shape);
                            auto dd = d.mutable_data();
                            const double inv = 1.0 / static_cast<double>(hw);
                            for (std::size_t i = 0; i < n * c; ++i)
                              std::fill_n(dd.data() + i * hw, hw, g[i] * inv);
                            grads[0] = std::move(d);
                          },
                          "global_avg_pool");
}

Var select_column(Var x, std::size_t column) {
  require_rank("select_column", x, 2, "[N, C]");
  const std::size_t n = x.shape()[0], c = x.shape()[1];
  if (column >= c) {
    throw ShapeError("select_column: column " + std::to_string(column) + " out of range for " +
                     std::to_string(c) + " columns");
  }
  Tensor out({n});
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < n; ++r) o[r] = x.value()[r * c + column];
  return x.tape()->record(std::move(out), {x},
                          [n, c, column](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
                            Tensor d({n, c});
                            auto dd = d.mutable_data();
                            for (std::size_t r = 0; r < n; ++r) dd[r * c + column] = g[r];
                            grads[0] = std::move(d);
                          },
                          "select_column");
}

Var cross_entropy(Var probs, std::span<const int> labels) {
  require_rank("cross_entropy", probs, 2, "[N, K]");
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                     " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ShapeError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(k) + ")");
    }
  }
  const Tensor p = probs.value();
  std::vector<int> ys(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) loss -= std::log(std::max(p[r * k + ys[r]], kProbClamp));
  loss /= static_cast<double>(n);
  return probs.tape()->record(
      Tensor::scalar(loss), {probs},
      [p, ys, n, k](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
        Tensor d({n, k});
        auto dd = d.mutable_data();
        for (std::size_t r = 0; r < n; ++r) {
          const double v = p[r * k + ys[r]];
          if (v > kProbClamp) dd[r * k + ys[r]] = -g[0] / (v * static_cast<double>(n));
        }
        grads[0] = std::move(d);
      },
      "cross_entropy");
}

Var multilabel_bce(Var probs, const Tensor& targets) {
  require_rank("multilabel_bce", probs, 2, "[N, K]");
  if (targets.shape() != probs.shape()) {
    throw ShapeError("multilabel_bce: targets " + shape_str(targets.shape()) + " vs probs " +
                     shape_str(probs.shape()));
  }
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  const Tensor p = probs.value();
  constexpr double lo = kProbClamp, hi = 1.0 - kProbClamp;
  double loss = 0.0;
  for (std::size_t i = 0; i < n * k; ++i) {
    const double v = std::clamp(p[i], lo, hi);
    loss -= targets[i] * std::log(v) + (1.0 - targets[i]) * std::log(1.0 - v);
  }
  loss /= static_cast<double>(n);
  return probs.tape()->record(
      Tensor::scalar(loss), {probs},
      [p, targets, n, k](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
        Tensor d({n, k});
        auto dd = d.mutable_data();
        const double scale = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n * k; ++i) {
          const double v = p[i];
          if (v <= lo || v >= hi) continue;
          dd[i] = scale * (-targets[i] / v + (1.0 - targets[i]) / (1.0 - v));
        }
        grads[0] = std::move(d);
      },
      "multilabel_bce");
}

Var irfft2(Var spectrum, std::size_t height, std::size_t width) {
  require_rank("irfft2", spectrum, 4, "[C, H, W/2+1, 2]");
  const std::size_t c = spectrum.shape()[0], wh = half_width(width);
  if (spectrum.shape() != Shape{c, height, wh, 2}) {
    throw ShapeError("irfft2: spectrum " + shape_str(spectrum.shape()) + " does not match a " +
                     std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  Tensor out({c, height, width});
  {
    auto o = out.mutable_data();
    const std::size_t plane_in = height * wh * 2, plane_out = height * width;
    auto s = spectrum.value().data();
    for (std::size_t ci = 0; ci < c; ++ci) {
      Tensor half({height, wh, 2}, std::vector<double>(s.begin() + ci * plane_in, s.begin() + (ci + 1) * plane_in));
      Tensor img = ifft2(half, height, width);
      std::copy_n(img.ptr(), plane_out, o.data() + ci * plane_out);
    }
  }
  return spectrum.tape()->record(
      std::move(out), {spectrum},
      [c, height, width, wh](const Tensor& g, std::span<const char>, std::span<Tensor> grads) {
        // Adjoint of the real-linear map half-spectrum -> image: fft2 of the
        // upstream gradient scaled by 1/(HW), doubled on bins that also stand in
        // for their Hermitian mirror.
        Tensor d({c, height, wh, 2});
        auto dd = d.mutable_data();
        const double norm = 1.0 / static_cast<double>(height * width);
        const std::size_t plane = height * width;
        for (std::size_t ci = 0; ci < c; ++ci) {
          Tensor gi({height, width}, std::vector<double>(g.data().begin() + ci * plane, g.data().begin() + (ci + 1) * plane));
          Tensor spec = fft2(gi);
          auto sp = spec.data();
          for (std::size_t y = 0; y < height; ++y)
            for (std::size_t k = 0; k < wh; ++k) {
              const bool mirrored = k > 0 && 2 * k != width;
              const double wgt = (mirrored ? 2.0 : 1.0) * norm;
              const std::size_t i = (y * wh + k) * 2;
              dd[ci * height * wh * 2 + i] = wgt * sp[i];
              dd[ci * height * wh * 2 + i + 1] = wgt * sp[i + 1];
            }
        }
        grads[0] = std::move(d);
      },
      "irfft2");
}

}  // namespace ftscope::ops
