#include "glee/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glee/common/error.hpp"
#include "glee/kernels/kernels.hpp"

namespace glee::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_same(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
}

void require_rank(const Var& a, std::size_t r, const char* op) {
  require(a.value().rank() == r, std::string(op) + ": expected rank " + std::to_string(r) +
                                     ", got " + to_string(a.shape()));
}

void accumulate(Tensor* sink, const Tensor& g, float alpha = 1.0f) {
  if (sink != nullptr) kernels::active().axpy(alpha, g.data(), sink->data(), g.size());
}

}  // namespace

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  kernels::active().axpy(1.0f, b.value().data(), out.data(), out.size());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t.grad_sink(ia), t.grad(self));
    accumulate(t.grad_sink(ib), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  kernels::active().axpy(-1.0f, b.value().data(), out.data(), out.size());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    accumulate(t.grad_sink(ia), t.grad(self));
    accumulate(t.grad_sink(ib), t.grad(self), -1.0f);
  });
}

Var scale(Var a, float s) {
  Tensor out = a.value();
  for (float& v : out.values()) v *= s;
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, int self) {
    accumulate(t.grad_sink(ia), t.grad(self), s);
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, int self) {
    Tensor* sink = t.grad_sink(ia);
    if (sink == nullptr) return;
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > 0.0f) (*sink)[i] += g[i];
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (float& v : out.values()) v = 1.0f / (1.0f + std::exp(-v));
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, int self) {
    Tensor* sink = t.grad_sink(ia);
    if (sink == nullptr) return;
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*sink)[i] += g[i] * y[i] * (1.0f - y[i]);
  });
}

Var add_row_bias(Var x, Var b) {
  require_rank(x, 2, "add_row_bias");
  require_rank(b, 1, "add_row_bias");
  const std::size_t n = x.value().dim(0), d = x.value().dim(1);
  require(b.value().dim(0) == d, "add_row_bias: bias length mismatch");
  Tensor out = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    kernels::active().axpy(1.0f, b.value().data(), out.data() + r * d, d);
  }
  const int ix = x.id(), ib = b.id();
  return x.tape().record(std::move(out), {x, b}, [ix, ib, n, d](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t.grad_sink(ix), g);
    if (Tensor* sb = t.grad_sink(ib)) {
      for (std::size_t r = 0; r < n; ++r) kernels::active().axpy(1.0f, g.data() + r * d, sb->data(), d);
    }
  });
}

Var add_channel_bias(Var x, Var b) {
  require_rank(b, 1, "add_channel_bias");
  const std::size_t c = x.value().dim(0);
  require(b.value().dim(0) == c, "add_channel_bias: bias length mismatch");
  const std::size_t inner = x.value().size() / c;
  Tensor out = x.value();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float bv = b.value()[ch];
    float* p = out.data() + ch * inner;
    for (std::size_t i = 0; i < inner; ++i) p[i] += bv;
  }
  const int ix = x.id(), ib = b.id();
  return x.tape().record(std::move(out), {x, b}, [ix, ib, c, inner](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t.grad_sink(ix), g);
    if (Tensor* sb = t.grad_sink(ib)) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const float* p = g.data() + ch * inner;
        float s = 0.0f;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
        (*sb)[ch] += s;
      }
    }
  });
}

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  require(b.value().dim(0) == k, "matmul: inner dimension mismatch " + to_string(a.shape()) +
                                     " x " + to_string(b.shape()));
  Tensor out({m, n});
  kernels::gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, n, k](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (Tensor* sa = t.grad_sink(ia)) {
      // dA[m,k] += G[m,n] * B[k,n]^T
      kernels::gemm_nt(m, k, n, g.data(), t.value(ib).data(), sa->data());
    }
    if (Tensor* sb = t.grad_sink(ib)) {
      // dB[k,n] += A[m,k]^T * G[m,n]
      kernels::gemm_tn(k, n, m, t.value(ia).data(), g.data(), sb->data());
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(0);
  require(b.value().dim(1) == k, "matmul_nt: inner dimension mismatch");
  Tensor out({m, n});
  kernels::gemm_nt(m, n, k, a.value().data(), b.value().data(), out.data());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, n, k](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (Tensor* sa = t.grad_sink(ia)) {
      // dA[m,k] += G[m,n] * B[n,k]
      kernels::gemm_nn(m, k, n, g.data(), t.value(ib).data(), sa->data());
    }
    if (Tensor* sb = t.grad_sink(ib)) {
      // dB[n,k] += G^T[n,m] * A[m,k]
      kernels::gemm_tn(n, k, m, g.data(), t.value(ia).data(), sb->data());
    }
  });
}

Var matmul_tn(Var a, Var b) {
  require_rank(a, 2, "matmul_tn");
  require_rank(b, 2, "matmul_tn");
  const std::size_t k = a.value().dim(0), m = a.value().dim(1), n = b.value().dim(1);
  require(b.value().dim(0) == k, "matmul_tn: inner dimension mismatch");
  Tensor out({m, n});
  kernels::gemm_tn(m, n, k, a.value().data(), b.value().data(), out.data());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, n, k](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (Tensor* sa = t.grad_sink(ia)) {
      // dA[k,m] += B[k,n] * G[m,n]^T
      kernels::gemm_nt(k, m, n, t.value(ib).data(), g.data(), sa->data());
    }
    if (Tensor* sb = t.grad_sink(ib)) {
      // dB[k,n] += A[k,m] * G[m,n]
      kernels::gemm_nn(k, n, m, t.value(ia).data(), g.data(), sb->data());
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_rank(weight, 2, "linear");
  const bool vec = x.value().rank() == 1;
  Var x2 = vec ? reshape(x, {1, x.value().dim(0)}) : x;
  require_rank(x2, 2, "linear");
  require(x2.value().dim(1) == weight.value().dim(1),
          "linear: input width " + std::to_string(x2.value().dim(1)) + " vs weight " +
              to_string(weight.shape()));
  Var y = matmul_nt(x2, weight);
  if (bias.valid()) y = add_row_bias(y, bias);
  return vec ? reshape(y, {weight.value().dim(0)}) : y;
}

Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const std::size_t o = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  require(wv.dim(1) == c, "conv2d: channel mismatch, input " + to_string(xv.shape()) +
                              " weight " + to_string(wv.shape()));
  require(stride >= 1 && h + 2 * pad >= kh && w + 2 * pad >= kw, "conv2d: bad geometry");
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t p = ho * wo;
  const std::size_t ckk = c * kh * kw;

  std::vector<float> cols(ckk * p, 0.0f);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* plane = xv.data() + ch * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        float* dst = cols.data() + ((ch * kh + ky) * kw + kx) * p;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }

  Tensor out({o, ho, wo});
  kernels::gemm_nn(o, p, ckk, wv.data(), cols.data(), out.data());

  const int ix = x.id(), iw = weight.id();
  Var y = x.tape().record(
      std::move(out), {x, weight},
      [ix, iw, c, h, w, o, kh, kw, ho, wo, p, ckk, stride, pad,
       cols = std::move(cols)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (Tensor* sw = t.grad_sink(iw)) {
          kernels::gemm_nt(o, ckk, p, g.data(), cols.data(), sw->data());
        }
        if (Tensor* sx = t.grad_sink(ix)) {
          std::vector<float> dcols(ckk * p, 0.0f);
          kernels::gemm_tn(ckk, p, o, t.value(iw).data(), g.data(), dcols.data());
          for (std::size_t ch = 0; ch < c; ++ch) {
            float* plane = sx->data() + ch * h * w;
            for (std::size_t ky = 0; ky < kh; ++ky) {
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const float* src = dcols.data() + ((ch * kh + ky) * kw + kx) * p;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                            static_cast<std::ptrdiff_t>(pad);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  float* dst = plane + static_cast<std::size_t>(iy) * w;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::ptrdiff_t ixx = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                               static_cast<std::ptrdiff_t>(pad);
                    if (ixx < 0 || ixx >= static_cast<std::ptrdiff_t>(w)) continue;
                    dst[ixx] += src[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      });
  return bias.valid() ? add_channel_bias(y, bias) : y;
}

Var mean_trailing(Var x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 2, "mean_trailing: rank >= 2 required");
  const std::size_t c = xv.dim(0);
  const std::size_t inner = xv.size() / c;
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* p = xv.data() + ch * inner;
    float s = 0.0f;
    for (std::size_t i = 0; i < inner; ++i) s += p[i];
    out[ch] = s / static_cast<float>(inner);
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, c, inner](Tape& t, int self) {
    Tensor* sx = t.grad_sink(ix);
    if (sx == nullptr) return;
    const Tensor& g = t.grad(self);
    const float inv = 1.0f / static_cast<float>(inner);
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* p = sx->data() + ch * inner;
      const float gv = g[ch] * inv;
      for (std::size_t i = 0; i < inner; ++i) p[i] += gv;
    }
  });
}

Var softmax_rows(Var x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t m = x.value().dim(0), n = x.value().dim(1);
  Tensor out = x.value();
  for (std::size_t r = 0; r < m; ++r) {
    float* p = out.data() + r * n;
    const float mx = *std::max_element(p, p + n);
    float s = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(p[j] - mx);
      s += p[j];
    }
    const float inv = 1.0f / s;
    for (std::size_t j = 0; j < n; ++j) p[j] *= inv;
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, m, n](Tape& t, int self) {
    Tensor* sx = t.grad_sink(ix);
    if (sx == nullptr) return;
    const Tensor& y = t.value(self);
    const Tensor& g = t.grad(self);
    for (std::size_t r = 0; r < m; ++r) {
      const float* yr = y.data() + r * n;
      const float* gr = g.data() + r * n;
      float* dr = sx->data() + r * n;
      const float inner = kernels::active().dot(yr, gr, n);
      for (std::size_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - inner);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, float eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t n = x.value().dim(0), d = x.value().dim(1);
  require(gamma.value().size() == d && beta.value().size() == d, "layer_norm: affine size");
  Tensor out({n, d});
  std::vector<float> xhat(n * d);
  std::vector<float> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    const float* xr = x.value().data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const float xh = static_cast<float>(xr[j] - mean) * is;
      xhat[r * d + j] = xh;
      out[r * d + j] = xh * gamma.value()[j] + beta.value()[j];
    }
  }
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& gam = t.value(ig);
        if (Tensor* sg = t.grad_sink(ig)) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d; ++j) (*sg)[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (Tensor* sb = t.grad_sink(ib)) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d; ++j) (*sb)[j] += g[r * d + j];
        }
        if (Tensor* sx = t.grad_sink(ix)) {
          const float invd = 1.0f / static_cast<float>(d);
          for (std::size_t r = 0; r < n; ++r) {
            float mean_dxh = 0.0f, mean_dxh_xh = 0.0f;
            for (std::size_t j = 0; j < d; ++j) {
              const float dxh = g[r * d + j] * gam[j];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xhat[r * d + j];
            }
            mean_dxh *= invd;
            mean_dxh_xh *= invd;
            for (std::size_t j = 0; j < d; ++j) {
              const float dxh = g[r * d + j] * gam[j];
              (*sx)[r * d + j] += inv_std[r] * (dxh - mean_dxh - xhat[r * d + j] * mean_dxh_xh);
            }
          }
        }
      });
}

Var transpose(Var x) {
  require_rank(x, 2, "transpose");
  const std::size_t m = x.value().dim(0), n = x.value().dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.value()[i * n + j];
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, m, n](Tape& t, int self) {
    Tensor* sx = t.grad_sink(ix);
    if (sx == nullptr) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*sx)[i * n + j] += g[j * m + i];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, int self) {
    accumulate(t.grad_sink(ix), t.grad(self));
  });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat: no inputs");
  std::size_t total = 0;
  for (const Var& v : parts) total += v.value().size();
  Tensor out({total});
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& v : parts) {
    std::copy(v.value().data(), v.value().data() + v.value().size(), out.data() + off);
    ids.push_back(v.id());
    offsets.push_back(off);
    off += v.value().size();
  }
  return parts.front().tape().record(
      std::move(out), parts, [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (Tensor* s = t.grad_sink(ids[i])) {
            kernels::active().axpy(1.0f, g.data() + offsets[i], s->data(), s->size());
          }
        }
      });
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows: no inputs");
  const std::size_t d = rows.front().value().size();
  for (const Var& r : rows) require(r.value().size() == d, "stack_rows: ragged rows");
  return reshape(concat(rows), {rows.size(), d});
}

Var row(Var x, std::size_t i) {
  require_rank(x, 2, "row");
  const std::size_t n = x.value().dim(0), d = x.value().dim(1);
  require(i < n, "row: index out of range");
  Tensor out({d}, std::vector<float>(x.value().data() + i * d, x.value().data() + (i + 1) * d));
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, i, d](Tape& t, int self) {
    if (Tensor* s = t.grad_sink(ix)) {
      kernels::active().axpy(1.0f, t.grad(self).data(), s->data() + i * d, d);
    }
  });
}

Var slice_cols(Var x, std::size_t c0, std::size_t c1) {
  require_rank(x, 2, "slice_cols");
  const std::size_t n = x.value().dim(0), d = x.value().dim(1);
  require(c0 < c1 && c1 <= d, "slice_cols: bad range");
  const std::size_t w = c1 - c0;
  Tensor out({n, w});
  for (std::size_t r = 0; r < n; ++r)
    std::copy(x.value().data() + r * d + c0, x.value().data() + r * d + c1, out.data() + r * w);
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, n, d, c0, w](Tape& t, int self) {
    Tensor* s = t.grad_sink(ix);
    if (s == nullptr) return;
    const Tensor& g = t.grad(self);
    for (std::size_t r = 0; r < n; ++r)
      kernels::active().axpy(1.0f, g.data() + r * w, s->data() + r * d + c0, w);
  });
}

Var concat_cols(const std::vector<Var>& blocks) {
  require(!blocks.empty(), "concat_cols: no inputs");
  const std::size_t n = blocks.front().value().dim(0);
  std::size_t d = 0;
  std::vector<std::size_t> widths;
  std::vector<int> ids;
  for (const Var& b : blocks) {
    require_rank(b, 2, "concat_cols");
    require(b.value().dim(0) == n, "concat_cols: row count mismatch");
    widths.push_back(b.value().dim(1));
    ids.push_back(b.id());
    d += b.value().dim(1);
  }
  Tensor out({n, d});
  std::size_t off = 0;
  for (const Var& b : blocks) {
    const std::size_t w = b.value().dim(1);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(b.value().data() + r * w, b.value().data() + (r + 1) * w, out.data() + r * d + off);
    off += w;
  }
  return blocks.front().tape().record(
      std::move(out), blocks,
      [ids = std::move(ids), widths = std::move(widths), n, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        std::size_t o = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (Tensor* s = t.grad_sink(ids[i])) {
            for (std::size_t r = 0; r < n; ++r)
              kernels::active().axpy(1.0f, g.data() + r * d + o, s->data() + r * widths[i], widths[i]);
          }
          o += widths[i];
        }
      });
}

Var sum(Var x) {
  float s = 0.0f;
  for (float v : x.value().values()) s += v;
  const int ix = x.id();
  return x.tape().record(Tensor({1}, std::vector<float>{s}), {x}, [ix](Tape& t, int self) {
    Tensor* sx = t.grad_sink(ix);
    if (sx == nullptr) return;
    const float g = t.grad(self)[0];
    for (float& v : sx->values()) v += g;
  });
}

}  // namespace glee::nn
