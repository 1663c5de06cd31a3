#include "resinv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "resinv/errors.hpp"
#include "resinv/kernels.hpp"

namespace resinv::ops {

namespace {

using detail::Node;

void same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    contract_fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.ndim() != rank)
    contract_fail(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                  shape_str(t.shape()));
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }
std::vector<double>& gbuf(Node& n, std::size_t i) { return n.inputs[i]->grad_buffer(); }
const std::vector<double>& val(const Node& n, std::size_t i) { return n.inputs[i]->value; }

template <class F>
Tensor unary(const char* op, const Tensor& a, F f, std::function<void(Node&)> bw) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_result(op, a.shape(), std::move(out), {a}, std::move(bw));
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  same_shape("add", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (wants(n, k)) {
        auto& g = gbuf(n, k);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  same_shape("sub", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) {
      auto& g = gbuf(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      auto& g = gbuf(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  same_shape("mul", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& n) {
    const auto &x = val(n, 0), &y = val(n, 1);
    if (wants(n, 0)) {
      auto& g = gbuf(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y[i];
    }
    if (wants(n, 1)) {
      auto& g = gbuf(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  same_shape("div", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] == 0.0) contract_fail("div: division by zero at element " + std::to_string(i));
    out[i] = x[i] / y[i];
  }
  return make_result("div", a.shape(), std::move(out), {a, b}, [](Node& n) {
    const auto &x = val(n, 0), &y = val(n, 1);
    if (wants(n, 0)) {
      auto& g = gbuf(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / y[i];
    }
    if (wants(n, 1)) {
      auto& g = gbuf(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i] * x[i] / (y[i] * y[i]);
    }
  });
}

Tensor scalar_mul(const Tensor& a, double s) {
  return unary("scalar_mul", a, [s](double v) { return v * s; }, [s](Node& n) {
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * s;
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double v) { return v + s; }, [](Node& n) {
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double v) { return std::exp(v); }, [](Node& n) {
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i];
  });
}

Tensor abs(const Tensor& a) {
  return unary("abs", a, [](double v) { return std::fabs(v); }, [](Node& n) {
    const auto& x = val(n, 0);
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i] > 0.0 ? n.grad[i] : (x[i] < 0.0 ? -n.grad[i] : 0.0);
  });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double v) { return v * v; }, [](Node& n) {
    const auto& x = val(n, 0);
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * n.grad[i];
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary("clamp", a, [lo, hi](double v) { return std::clamp(v, lo, hi); }, [lo, hi](Node& n) {
    const auto& x = val(n, 0);
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > lo && x[i] < hi) g[i] += n.grad[i];
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary("leaky_relu", a, [slope](double v) { return v > 0.0 ? v : slope * v; }, [slope](Node& n) {
    const auto& x = val(n, 0);
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i] > 0.0 ? n.grad[i] : slope * n.grad[i];
  });
}

Tensor silu(const Tensor& a) {
  return unary("silu", a, [](double v) { return v / (1.0 + std::exp(-v)); }, [](Node& n) {
    const auto& x = val(n, 0);
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x[i]));
      g[i] += n.grad[i] * s * (1.0 + x[i] * (1.0 - s));
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {1}, {s}, {a}, [](Node& n) {
    auto& g = gbuf(n, 0);
    for (double& v : g) v += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double count = static_cast<double>(a.numel());
  return make_result("mean", {1}, {s / count}, {a}, [count](Node& n) {
    auto& g = gbuf(n, 0);
    const double d = n.grad[0] / count;
    for (double& v : g) v += d;
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    contract_fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& n) {
    auto& g = gbuf(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

namespace {

struct ConvGeom {
  std::size_t n, ci, h, w, co, kh, kw, ho, wo;
  int pad;
  std::size_t k() const { return ci * kh * kw; }
  std::size_t p() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && pad == 0; }
};

void im2col(const ConvGeom& g, const double* x, double* col) {
  const std::size_t P = g.p();
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* dst = col + ((c * g.kh + ky) * g.kw + kx) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy + ky) - g.pad;
          double* drow = dst + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(drow, drow + g.wo, 0.0);
            continue;
          }
          const double* srow = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox + kx) - g.pad;
            drow[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : srow[ix];
          }
        }
      }
}

void col2im_add(const ConvGeom& g, const double* col, double* x) {
  const std::size_t P = g.p();
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* src = col + ((c * g.kh + ky) * g.kw + kx) * P;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy + ky) - g.pad;
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          double* xrow = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const double* srow = src + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox + kx) - g.pad;
            if (ix >= 0 && ix < static_cast<long>(g.w)) xrow[ix] += srow[ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding) {
  require_rank("conv2d", input, 4, "input");
  require_rank("conv2d", weight, 4, "weight");
  require(padding >= 0, "conv2d: padding must be >= 0");
  ConvGeom g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2), weight.dim(3),
             0, 0, padding};
  if (weight.dim(1) != g.ci)
    contract_fail("conv2d: input channels (dim 1) " + std::to_string(g.ci) + " != weight in-channels (dim 1) " +
                  std::to_string(weight.dim(1)));
  if (g.kh % 2 == 0 || g.kw % 2 == 0) contract_fail("conv2d: kernel extents must be odd, got " + shape_str(weight.shape()));
  const long ho = static_cast<long>(g.h) + 2 * padding - static_cast<long>(g.kh) + 1;
  const long wo = static_cast<long>(g.w) + 2 * padding - static_cast<long>(g.kw) + 1;
  if (ho < 1 || wo < 1) contract_fail("conv2d: kernel larger than padded input (height/width)");
  g.ho = static_cast<std::size_t>(ho);
  g.wo = static_cast<std::size_t>(wo);
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != g.co))
    contract_fail("conv2d: bias must have shape [" + std::to_string(g.co) + "], got " + shape_str(bias.shape()));

  const auto& kt = kernels::active();
  const std::size_t K = g.k(), P = g.p();
  const auto x = input.data();
  const auto wv = weight.data();
  std::vector<double> out(g.n * g.co * P, 0.0);
  std::vector<double> col(g.pointwise() ? 0 : K * P);
  for (std::size_t b = 0; b < g.n; ++b) {
    const double* xb = x.data() + b * g.ci * g.h * g.w;
    const double* cb = xb;
    if (!g.pointwise()) {
      im2col(g, xb, col.data());
      cb = col.data();
    }
    double* ob = out.data() + b * g.co * P;
    if (bias.defined())
      for (std::size_t o = 0; o < g.co; ++o) std::fill(ob + o * P, ob + (o + 1) * P, bias.data()[o]);
    kt.gemm(g.co, P, K, wv.data(), K, cb, P, ob, P);
  }

  const bool has_bias = bias.defined();
  auto bw = [g, has_bias](Node& n) {
    const auto& kt = kernels::active();
    const std::size_t K = g.k(), P = g.p();
    const auto& x = val(n, 0);
    const auto& w = val(n, 1);
    const bool gx = wants(n, 0), gw = wants(n, 1), gb = has_bias && wants(n, 2);
    std::vector<double> col(g.pointwise() ? 0 : K * P), colT, wT, dcol;
    if (gw) colT.resize(K * P);
    if (gx) {
      wT.resize(K * g.co);
      transpose(w.data(), g.co, K, wT.data());
      dcol.resize(K * P);
    }
    for (std::size_t b = 0; b < g.n; ++b) {
      const double* gout = n.grad.data() + b * g.co * P;
      if (gb) {
        auto& db = gbuf(n, 2);
        for (std::size_t o = 0; o < g.co; ++o) {
          double s = 0.0;
          for (std::size_t p = 0; p < P; ++p) s += gout[o * P + p];
          db[o] += s;
        }
      }
      const double* xb = x.data() + b * g.ci * g.h * g.w;
      if (gw) {
        const double* cb = xb;
        if (!g.pointwise()) {
          im2col(g, xb, col.data());
          cb = col.data();
        }
        transpose(cb, K, P, colT.data());
        kt.gemm(g.co, K, P, gout, P, colT.data(), K, gbuf(n, 1).data(), K);
      }
      if (gx) {
        double* dxb = gbuf(n, 0).data() + b * g.ci * g.h * g.w;
        if (g.pointwise()) {
          kt.gemm(K, P, g.co, wT.data(), g.co, gout, P, dxb, P);
        } else {
          std::fill(dcol.begin(), dcol.end(), 0.0);
          kt.gemm(K, P, g.co, wT.data(), g.co, gout, P, dcol.data(), P);
          col2im_add(g, dcol.data(), dxb);
        }
      }
    }
  };
  Shape shape{g.n, g.co, g.ho, g.wo};
  if (has_bias) return make_result("conv2d", std::move(shape), std::move(out), {input, weight, bias}, bw);
  return make_result("conv2d", std::move(shape), std::move(out), {input, weight}, bw);
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps) {
  require_rank("group_norm", x, 4, "input");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  require(groups >= 1 && C % static_cast<std::size_t>(groups) == 0,
          "group_norm: " + std::to_string(C) + " channels not divisible into " + std::to_string(groups) + " groups");
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "group_norm: affine parameters must have shape [C]");
  const std::size_t G = static_cast<std::size_t>(groups), cpg = C / G, m = cpg * HW;
  const auto xv = x.data();
  const auto gv = gamma.data(), bv = beta.data();
  std::vector<double> out(xv.size()), xhat(xv.size()), rstd(N * G);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t gi = 0; gi < G; ++gi) {
      const std::size_t base = (n * C + gi * cpg) * HW;
      double mu = 0.0;
      for (std::size_t i = 0; i < m; ++i) mu += xv[base + i];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) var += (xv[base + i] - mu) * (xv[base + i] - mu);
      var /= static_cast<double>(m);
      const double r = 1.0 / std::sqrt(var + eps);
      rstd[n * G + gi] = r;
      for (std::size_t c = 0; c < cpg; ++c) {
        const std::size_t ch = gi * cpg + c;
        for (std::size_t i = 0; i < HW; ++i) {
          const std::size_t idx = base + c * HW + i;
          xhat[idx] = (xv[idx] - mu) * r;
          out[idx] = xhat[idx] * gv[ch] + bv[ch];
        }
      }
    }
  return make_result("group_norm", x.shape(), std::move(out), {x, gamma, beta},
                     [N, C, HW, G, cpg, m, xhat = std::move(xhat), rstd = std::move(rstd)](Node& n) {
                       const auto& gv = val(n, 1);
                       const auto& dy = n.grad;
                       if (wants(n, 1) || wants(n, 2)) {
                         auto* dg = wants(n, 1) ? &gbuf(n, 1) : nullptr;
                         auto* db = wants(n, 2) ? &gbuf(n, 2) : nullptr;
                         for (std::size_t b = 0; b < N; ++b)
                           for (std::size_t c = 0; c < C; ++c) {
                             double sg = 0.0, sb = 0.0;
                             const std::size_t base = (b * C + c) * HW;
                             for (std::size_t i = 0; i < HW; ++i) {
                               sg += dy[base + i] * xhat[base + i];
                               sb += dy[base + i];
                             }
                             if (dg) (*dg)[c] += sg;
                             if (db) (*db)[c] += sb;
                           }
                       }
                       if (!wants(n, 0)) return;
                       auto& dx = gbuf(n, 0);
                       const double inv_m = 1.0 / static_cast<double>(m);
                       for (std::size_t b = 0; b < N; ++b)
                         for (std::size_t gi = 0; gi < G; ++gi) {
                           const std::size_t base = (b * C + gi * cpg) * HW;
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t c = 0; c < cpg; ++c) {
                             const double gm = gv[gi * cpg + c];
                             for (std::size_t i = 0; i < HW; ++i) {
                               const std::size_t idx = base + c * HW + i;
                               const double d = dy[idx] * gm;
                               s1 += d;
                               s2 += d * xhat[idx];
                             }
                           }
                           const double r = rstd[b * G + gi];
                           for (std::size_t c = 0; c < cpg; ++c) {
                             const double gm = gv[gi * cpg + c];
                             for (std::size_t i = 0; i < HW; ++i) {
                               const std::size_t idx = base + c * HW + i;
                               dx[idx] += r * (dy[idx] * gm - s1 * inv_m - xhat[idx] * s2 * inv_m);
                             }
                           }
                         }
                     });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double w;
};

std::vector<Tap> bilinear_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  const double hi = static_cast<double>(src - 1);
  for (std::size_t d = 0; d < dst; ++d) {
    double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, hi);
    const std::size_t i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, src - 1);
    taps[d] = {i0, i1, s - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Tensor interp_resize(const Tensor& x, Size2 target) {
  require_rank("interp_resize", x, 4, "input");
  require(target.h >= 1 && target.w >= 1, "interp_resize: target must be >= 1 per axis, got " + target.str());
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = static_cast<std::size_t>(target.h), Wo = static_cast<std::size_t>(target.w);
  auto ty = bilinear_taps(H, Ho), tx = bilinear_taps(W, Wo);
  const auto& kt = kernels::active();
  const auto xv = x.data();
  std::vector<double> out(N * C * Ho * Wo), tmp(H * Wo);
  for (std::size_t p = 0; p < N * C; ++p) {
    const double* src = xv.data() + p * H * W;
    for (std::size_t y = 0; y < H; ++y) {
      const double* row = src + y * W;
      double* trow = tmp.data() + y * Wo;
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const Tap& t = tx[ox];
        trow[ox] = row[t.i0] + t.w * (row[t.i1] - row[t.i0]);
      }
    }
    double* dst = out.data() + p * Ho * Wo;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      const Tap& t = ty[oy];
      kt.lerp(Wo, tmp.data() + t.i0 * Wo, tmp.data() + t.i1 * Wo, t.w, dst + oy * Wo);
    }
  }
  return make_result("interp_resize", {N, C, Ho, Wo}, std::move(out), {x},
                     [N, C, H, W, Ho, Wo, ty = std::move(ty), tx = std::move(tx)](Node& n) {
                       const auto& kt = kernels::active();
                       auto& gx = gbuf(n, 0);
                       std::vector<double> gtmp(H * Wo);
                       for (std::size_t p = 0; p < N * C; ++p) {
                         std::fill(gtmp.begin(), gtmp.end(), 0.0);
                         const double* gout = n.grad.data() + p * Ho * Wo;
                         for (std::size_t oy = 0; oy < Ho; ++oy) {
                           const Tap& t = ty[oy];
                           kt.axpy(Wo, 1.0 - t.w, gout + oy * Wo, gtmp.data() + t.i0 * Wo);
                           kt.axpy(Wo, t.w, gout + oy * Wo, gtmp.data() + t.i1 * Wo);
                         }
                         double* dst = gx.data() + p * H * W;
                         for (std::size_t y = 0; y < H; ++y) {
                           const double* trow = gtmp.data() + y * Wo;
                           double* drow = dst + y * W;
                           for (std::size_t ox = 0; ox < Wo; ++ox) {
                             const Tap& t = tx[ox];
                             drow[t.i0] += (1.0 - t.w) * trow[ox];
                             drow[t.i1] += t.w * trow[ox];
                           }
                         }
                       }
                     });
}

Tensor separable_filter_valid(const Tensor& x, std::span<const double> kernel) {
  require_rank("separable_filter_valid", x, 4, "input");
  const std::size_t L = kernel.size();
  require(L >= 1, "separable_filter_valid: empty kernel");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < L || W < L)
    contract_fail("separable_filter_valid: image " + std::to_string(H) + "x" + std::to_string(W) +
                  " smaller than window " + std::to_string(L));
  const std::size_t Ho = H - L + 1, Wo = W - L + 1;
  std::vector<double> k(kernel.begin(), kernel.end());
  const auto& kt = kernels::active();
  const auto xv = x.data();
  std::vector<double> out(N * C * Ho * Wo, 0.0), tmp(H * Wo);
  for (std::size_t p = 0; p < N * C; ++p) {
    const double* src = xv.data() + p * H * W;
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t j = 0; j < L; ++j) kt.axpy(Wo, k[j], src + y * W + j, tmp.data() + y * Wo);
    double* dst = out.data() + p * Ho * Wo;
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t j = 0; j < L; ++j) kt.axpy(Wo, k[j], tmp.data() + (oy + j) * Wo, dst + oy * Wo);
  }
  return make_result("separable_filter_valid", {N, C, Ho, Wo}, std::move(out), {x},
                     [N, C, H, W, Ho, Wo, L, k = std::move(k)](Node& n) {
                       const auto& kt = kernels::active();
                       auto& gx = gbuf(n, 0);
                       std::vector<double> gtmp(H * Wo);
                       for (std::size_t p = 0; p < N * C; ++p) {
                         std::fill(gtmp.begin(), gtmp.end(), 0.0);
                         const double* gout = n.grad.data() + p * Ho * Wo;
                         for (std::size_t oy = 0; oy < Ho; ++oy)
                           for (std::size_t j = 0; j < L; ++j)
                             kt.axpy(Wo, k[j], gout + oy * Wo, gtmp.data() + (oy + j) * Wo);
                         double* dst = gx.data() + p * H * W;
                         for (std::size_t y = 0; y < H; ++y)
                           for (std::size_t j = 0; j < L; ++j) kt.axpy(Wo, k[j], gtmp.data() + y * Wo, dst + y * W + j);
                       }
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4, "input");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const auto xv = x.data();
  std::vector<double> out(N * C);
  for (std::size_t p = 0; p < N * C; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += xv[p * HW + i];
    out[p] = s / static_cast<double>(HW);
  }
  return make_result("global_avg_pool", {N, C}, std::move(out), {x}, [HW](Node& n) {
    auto& g = gbuf(n, 0);
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t p = 0; p < n.grad.size(); ++p)
      for (std::size_t i = 0; i < HW; ++i) g[p * HW + i] += n.grad[p] * inv;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2, "input");
  require_rank("linear", weight, 2, "weight");
  const std::size_t N = x.dim(0), F = x.dim(1), O = weight.dim(0);
  if (weight.dim(1) != F)
    contract_fail("linear: input features (dim 1) " + std::to_string(F) + " != weight dim 1 " +
                  std::to_string(weight.dim(1)));
  require(bias.shape() == Shape{O}, "linear: bias must have shape [" + std::to_string(O) + "]");
  const auto& kt = kernels::active();
  std::vector<double> wT(F * O);
  transpose(weight.data().data(), O, F, wT.data());
  std::vector<double> out(N * O);
  for (std::size_t r = 0; r < N; ++r) std::copy(bias.data().begin(), bias.data().end(), out.begin() + r * O);
  kt.gemm(N, O, F, x.data().data(), F, wT.data(), O, out.data(), O);
  return make_result("linear", {N, O}, std::move(out), {x, weight, bias}, [N, F, O](Node& n) {
    const auto& kt = kernels::active();
    const auto& xv = val(n, 0);
    const auto& wv = val(n, 1);
    if (wants(n, 0)) kt.gemm(N, F, O, n.grad.data(), O, wv.data(), F, gbuf(n, 0).data(), F);
    if (wants(n, 1)) {
      std::vector<double> gT(O * N);
      transpose(n.grad.data(), N, O, gT.data());
      kt.gemm(O, F, N, gT.data(), N, xv.data(), F, gbuf(n, 1).data(), F);
    }
    if (wants(n, 2)) {
      auto& db = gbuf(n, 2);
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t o = 0; o < O; ++o) db[o] += n.grad[r * O + o];
    }
  });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require_rank("softmax_rows", logits, 2, "logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  const auto z = logits.data();
  std::vector<double> p(N * K);
  for (std::size_t r = 0; r < N; ++r) {
    double mx = z[r * K];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, z[r * K + k]);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += (p[r * K + k] = std::exp(z[r * K + k] - mx));
    for (std::size_t k = 0; k < K; ++k) p[r * K + k] /= s;
  }
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2, "logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  require(labels.size() == N, "softmax_cross_entropy: one label per row required");
  std::vector<int> lab(labels.begin(), labels.end());
  for (int l : lab) require(l >= 0 && static_cast<std::size_t>(l) < K, "softmax_cross_entropy: label out of range");
  auto p = softmax_rows(logits);
  double loss = 0.0;
  for (std::size_t r = 0; r < N; ++r) loss -= std::log(std::max(p[r * K + lab[r]], 1e-300));
  loss /= static_cast<double>(N);
  return make_result("softmax_cross_entropy", {1}, {loss}, {logits},
                     [N, K, lab = std::move(lab), p = std::move(p)](Node& n) {
                       auto& g = gbuf(n, 0);
                       const double s = n.grad[0] / static_cast<double>(N);
                       for (std::size_t r = 0; r < N; ++r)
                         for (std::size_t k = 0; k < K; ++k)
                           g[r * K + k] += s * (p[r * K + k] - (static_cast<std::size_t>(lab[r]) == k ? 1.0 : 0.0));
                     });
}

}  // namespace resinv::ops
