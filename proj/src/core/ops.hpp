#pragma once

#include <cmath>
#include <cstring>
#include <utility>

#include "core/autodiff.hpp"
#include "core/index.hpp"
#include "kernels/kernels.hpp"

// Differentiable ops. Forward math goes through the kernel table; backward
// closures hand-derive the adjoints. Reductions run in fixed order so results
// are reproducible bit-for-bit on a given backend.

namespace steadapt::ad {

namespace detail {

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <class T>
int rows_of(const Tensor<T>& t, int inner) {
    if (t.ndim() < 1 || t.shape().back() != inner)
        throw InvalidShape("last dim " + shape_str(t.shape()) + " != " + std::to_string(inner));
    return static_cast<int>(t.numel() / inner);
}

// probabilities computed in double, stored in T; rows stay normalized to ~eps
template <class T>
void softmax_row(T* x, int n) {
    T m = x[0];
    for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
    thread_local std::vector<double> e;
    e.resize(static_cast<size_t>(n));
    double s = 0;
    for (int i = 0; i < n; ++i) {
        e[static_cast<size_t>(i)] = std::exp(static_cast<double>(x[i]) - static_cast<double>(m));
        s += e[static_cast<size_t>(i)];
    }
    const double inv = 1.0 / s;
    for (int i = 0; i < n; ++i) x[i] = static_cast<T>(e[static_cast<size_t>(i)] * inv);
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape() != b->value.shape())
        throw InvalidShape("add " + shape_str(a->value.shape()) + " vs " +
                           shape_str(b->value.shape()));
    Tensor<T> out{a->value.shape()};
    kernels::K<T>().vadd(a->value.data(), b->value.data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        const auto& k = kernels::K<T>();
        if (a->requires_grad) k.axpy(T(1), n.grad.data(), a->ensure_grad().data(), n.grad.numel());
        if (b->requires_grad) k.axpy(T(1), n.grad.data(), b->ensure_grad().data(), n.grad.numel());
    });
}

// a + s*b with a compile-time-constant coefficient (the CAB weight).
template <class T>
Var<T> add_scaled(const Var<T>& a, const Var<T>& b, double s) {
    if (a->value.shape() != b->value.shape()) throw InvalidShape("add_scaled shape mismatch");
    Tensor<T> out = a->value.clone();
    kernels::K<T>().axpy(static_cast<T>(s), b->value.data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b}, [a, b, s](Node<T>& n) {
        const auto& k = kernels::K<T>();
        if (a->requires_grad) k.axpy(T(1), n.grad.data(), a->ensure_grad().data(), n.grad.numel());
        if (b->requires_grad)
            k.axpy(static_cast<T>(s), n.grad.data(), b->ensure_grad().data(), n.grad.numel());
    });
}

// a + gamma*b where gamma is a trainable scalar (shape {1}).
template <class T>
Var<T> scale_add(const Var<T>& a, const Var<T>& b, const Var<T>& gamma) {
    if (a->value.shape() != b->value.shape()) throw InvalidShape("scale_add shape mismatch");
    if (gamma->value.numel() != 1) throw InvalidShape("scale_add gamma must be a scalar");
    Tensor<T> out = a->value.clone();
    kernels::K<T>().axpy(gamma->value[0], b->value.data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b, gamma}, [a, b, gamma](Node<T>& n) {
        const auto& k = kernels::K<T>();
        if (a->requires_grad) k.axpy(T(1), n.grad.data(), a->ensure_grad().data(), n.grad.numel());
        if (b->requires_grad)
            k.axpy(gamma->value[0], n.grad.data(), b->ensure_grad().data(), n.grad.numel());
        if (gamma->requires_grad)
            gamma->ensure_grad()[0] += k.dot(n.grad.data(), b->value.data(), n.grad.numel());
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape() != b->value.shape()) throw InvalidShape("mul shape mismatch");
    Tensor<T> out{a->value.shape()};
    kernels::K<T>().vmul(a->value.data(), b->value.data(), out.data(), out.numel());
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        const auto& k = kernels::K<T>();
        if (a->requires_grad)
            k.vmuladd(n.grad.data(), b->value.data(), a->ensure_grad().data(), n.grad.numel());
        if (b->requires_grad)
            k.vmuladd(n.grad.data(), a->value.data(), b->ensure_grad().data(), n.grad.numel());
    });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape s) {
    Tensor<T> out = x->value.reshaped(std::move(s));
    return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (x->requires_grad)
            kernels::K<T>().axpy(T(1), n.grad.data(), x->ensure_grad().data(), n.grad.numel());
    });
}

// out[i] = x[idx[i]]; backward scatter-adds. Covers every layout change.
template <class T>
Var<T> gather(const Var<T>& x, idx::IndexVec map, Shape out_shape) {
    if (static_cast<std::int64_t>(map->size()) != shape_numel(out_shape))
        throw InvalidShape("gather index size != output numel");
    Tensor<T> out{std::move(out_shape)};
    const T* src = x->value.data();
    T* dst = out.data();
    const std::int32_t* ix = map->data();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) dst[i] = src[ix[i]];
    return make_op<T>(std::move(out), {x}, [x, map](Node<T>& n) {
        if (!x->requires_grad) return;
        T* gx = x->ensure_grad().data();
        const T* g = n.grad.data();
        const std::int32_t* ix = map->data();
        const std::int64_t cnt = n.grad.numel();
        for (std::int64_t i = 0; i < cnt; ++i) gx[ix[i]] += g[i];
    });
}

// y = x W' + b; x (..., in), w (out, in), b (out) or null.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int in = w->value.dim(1);
    const int out_f = w->value.dim(0);
    const int rows = detail::rows_of(x->value, in);
    Shape os = x->value.shape();
    os.back() = out_f;
    Tensor<T> out{os};
    const auto& k = kernels::K<T>();
    k.gemm_nt(x->value.data(), w->value.data(), out.data(), rows, in, out_f, false);
    if (b) {
        if (b->value.numel() != out_f) throw InvalidShape("linear bias size");
        T* o = out.data();
        const T* bv = b->value.data();
        for (int r = 0; r < rows; ++r) k.vadd(o + static_cast<std::int64_t>(r) * out_f, bv,
                                              o + static_cast<std::int64_t>(r) * out_f, out_f);
    }
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_op<T>(std::move(out), std::move(parents),
                      [x, w, b, rows, in, out_f](Node<T>& n) {
                          const auto& k = kernels::K<T>();
                          const T* g = n.grad.data();
                          if (x->requires_grad)
                              k.gemm_nn(g, w->value.data(), x->ensure_grad().data(), rows, out_f,
                                        in, true);
                          if (w->requires_grad)
                              k.gemm_tn(g, x->value.data(), w->ensure_grad().data(), out_f, rows,
                                        in, true);
                          if (b && b->requires_grad) {
                              T* gb = b->ensure_grad().data();
                              for (int r = 0; r < rows; ++r)
                                  k.axpy(T(1), g + static_cast<std::int64_t>(r) * out_f, gb, out_f);
                          }
                      });
}

template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
    return linear(x, w, Var<T>{});
}

template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5) {
    const int c = static_cast<int>(gamma->value.numel());
    const int rows = detail::rows_of(x->value, c);
    Tensor<T> out{x->value.shape()};
    auto stats = std::make_shared<Tensor<T>>(Shape{rows, 2});  // mean, inv-std per row
    const T* xv = x->value.data();
    T* ov = out.data();
    const T* gv = gamma->value.data();
    const T* bv = beta->value.data();
    for (int r = 0; r < rows; ++r) {
        const T* xr = xv + static_cast<std::int64_t>(r) * c;
        double mu = 0;
        for (int i = 0; i < c; ++i) mu += static_cast<double>(xr[i]);
        mu /= c;
        double var = 0;
        for (int i = 0; i < c; ++i) {
            const double d = static_cast<double>(xr[i]) - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * r] = static_cast<T>(mu);
        (*stats)[2 * r + 1] = static_cast<T>(is);
        T* orow = ov + static_cast<std::int64_t>(r) * c;
        for (int i = 0; i < c; ++i)
            orow[i] = static_cast<T>((static_cast<double>(xr[i]) - mu) * is *
                                         static_cast<double>(gv[i]) +
                                     static_cast<double>(bv[i]));
    }
    return make_op<T>(
        std::move(out), {x, gamma, beta}, [x, gamma, beta, stats, rows, c](Node<T>& n) {
            const T* g = n.grad.data();
            const T* xv = x->value.data();
            const T* gv = gamma->value.data();
            T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
            T* gg = gamma->requires_grad ? gamma->ensure_grad().data() : nullptr;
            T* gb = beta->requires_grad ? beta->ensure_grad().data() : nullptr;
            for (int r = 0; r < rows; ++r) {
                const std::int64_t off = static_cast<std::int64_t>(r) * c;
                const double mu = (*stats)[2 * r];
                const double is = (*stats)[2 * r + 1];
                double m1 = 0, m2 = 0;
                for (int i = 0; i < c; ++i) {
                    const double xh = (static_cast<double>(xv[off + i]) - mu) * is;
                    const double gy = static_cast<double>(g[off + i]);
                    const double gp = gy * static_cast<double>(gv[i]);
                    m1 += gp;
                    m2 += gp * xh;
                    if (gg) gg[i] += static_cast<T>(gy * xh);
                    if (gb) gb[i] += static_cast<T>(gy);
                }
                if (gx) {
                    m1 /= c;
                    m2 /= c;
                    for (int i = 0; i < c; ++i) {
                        const double xh = (static_cast<double>(xv[off + i]) - mu) * is;
                        const double gp =
                            static_cast<double>(g[off + i]) * static_cast<double>(gv[i]);
                        gx[off + i] += static_cast<T>((gp - m1 - xh * m2) * is);
                    }
                }
            }
        });
}

// Exact erf-based GELU.
template <class T>
Var<T> gelu(const Var<T>& x) {
    Tensor<T> out{x->value.shape()};
    const T* xv = x->value.data();
    T* ov = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const double v = static_cast<double>(xv[i]);
        ov[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * detail::kInvSqrt2)));
    }
    return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        const T* xv = x->value.data();
        const T* g = n.grad.data();
        T* gx = x->ensure_grad().data();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            const double v = static_cast<double>(xv[i]);
            const double cdf = 0.5 * (1.0 + std::erf(v * detail::kInvSqrt2));
            const double pdf = detail::kInvSqrt2Pi * std::exp(-0.5 * v * v);
            gx[i] += static_cast<T>(static_cast<double>(g[i]) * (cdf + v * pdf));
        }
    });
}

template <class T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out{x->value.shape()};
    const T* xv = x->value.data();
    T* ov = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
    return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        const T* xv = x->value.data();
        const T* g = n.grad.data();
        T* gx = x->ensure_grad().data();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i)
            if (xv[i] > T(0)) gx[i] += g[i];
    });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, double slope = 0.01) {
    Tensor<T> out{x->value.shape()};
    const T* xv = x->value.data();
    T* ov = out.data();
    const T s = static_cast<T>(slope);
    for (std::int64_t i = 0; i < out.numel(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : s * xv[i];
    return make_op<T>(std::move(out), {x}, [x, s](Node<T>& n) {
        if (!x->requires_grad) return;
        const T* xv = x->value.data();
        const T* g = n.grad.data();
        T* gx = x->ensure_grad().data();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) gx[i] += xv[i] > T(0) ? g[i] : s * g[i];
    });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
    Tensor<T> out{x->value.shape()};
    const T* xv = x->value.data();
    T* ov = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        ov[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(xv[i]))));
    return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        const T* yv = n.value.data();
        const T* g = n.grad.data();
        T* gx = x->ensure_grad().data();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i)
            gx[i] += g[i] * yv[i] * (T(1) - yv[i]);
    });
}

namespace detail {

// (Cin*kh*kw, H*W) patch matrix for one image, zero padding.
template <class T>
void im2col(const T* x, int cin, int h, int w, int kh, int kw, T* cols) {
    const int ph = kh / 2, pw = kw / 2;
    T* o = cols;
    for (int ci = 0; ci < cin; ++ci)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                const T* xc = x + static_cast<std::int64_t>(ci) * h * w;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy - ph;
                    if (sy < 0 || sy >= h) {
                        for (int xx = 0; xx < w; ++xx) *o++ = T(0);
                        continue;
                    }
                    const T* row = xc + static_cast<std::int64_t>(sy) * w;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + dx - pw;
                        *o++ = (sx < 0 || sx >= w) ? T(0) : row[sx];
                    }
                }
            }
}

template <class T>
void col2im_add(const T* cols, int cin, int h, int w, int kh, int kw, T* gx) {
    const int ph = kh / 2, pw = kw / 2;
    const T* o = cols;
    for (int ci = 0; ci < cin; ++ci)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                T* xc = gx + static_cast<std::int64_t>(ci) * h * w;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy - ph;
                    if (sy < 0 || sy >= h) {
                        o += w;
                        continue;
                    }
                    T* row = xc + static_cast<std::int64_t>(sy) * w;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + dx - pw;
                        if (sx >= 0 && sx < w) row[sx] += *o;
                        ++o;
                    }
                }
            }
}

}  // namespace detail

// Same-padded stride-1 convolution; w (Cout, Cin, kh, kw), odd kernel.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    if (x->value.ndim() != 4 || w->value.ndim() != 4) throw InvalidShape("conv2d expects 4-D");
    const int bsz = x->value.dim(0), cin = x->value.dim(1), h = x->value.dim(2),
              ww = x->value.dim(3);
    const int cout = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    if (w->value.dim(1) != cin)
        throw InvalidShape("conv2d channels: input " + std::to_string(cin) + ", weight " +
                           std::to_string(w->value.dim(1)));
    const int ckk = cin * kh * kw;
    const std::int64_t hw = static_cast<std::int64_t>(h) * ww;
    Tensor<T> out{{bsz, cout, h, ww}};
    const auto& k = kernels::K<T>();
    {
        std::vector<T> cols(static_cast<size_t>(ckk) * hw);
        for (int bi = 0; bi < bsz; ++bi) {
            detail::im2col(x->value.data() + static_cast<std::int64_t>(bi) * cin * hw, cin, h, ww,
                           kh, kw, cols.data());
            T* ob = out.data() + static_cast<std::int64_t>(bi) * cout * hw;
            k.gemm_nn(w->value.data(), cols.data(), ob, cout, ckk, static_cast<int>(hw), false);
            if (b) {
                const T* bv = b->value.data();
                for (int co = 0; co < cout; ++co) {
                    T* oc = ob + static_cast<std::int64_t>(co) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) oc[i] += bv[co];
                }
            }
        }
    }
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return make_op<T>(
        std::move(out), std::move(parents), [x, w, b, bsz, cin, h, ww, cout, kh, kw](Node<T>& n) {
            const auto& k = kernels::K<T>();
            const int ckk = cin * kh * kw;
            const std::int64_t hw = static_cast<std::int64_t>(h) * ww;
            std::vector<T> cols(static_cast<size_t>(ckk) * hw);
            std::vector<T> gcols;
            if (x->requires_grad) gcols.resize(static_cast<size_t>(ckk) * hw);
            for (int bi = 0; bi < bsz; ++bi) {
                const T* g = n.grad.data() + static_cast<std::int64_t>(bi) * cout * hw;
                if (w->requires_grad || x->requires_grad)
                    detail::im2col(x->value.data() + static_cast<std::int64_t>(bi) * cin * hw, cin,
                                   h, ww, kh, kw, cols.data());
                if (w->requires_grad)
                    k.gemm_nt(g, cols.data(), w->ensure_grad().data(), cout, static_cast<int>(hw),
                              ckk, true);
                if (x->requires_grad) {
                    k.gemm_tn(w->value.data(), g, gcols.data(), ckk, cout, static_cast<int>(hw),
                              false);
                    detail::col2im_add(gcols.data(), cin, h, ww, kh, kw,
                                       x->ensure_grad().data() +
                                           static_cast<std::int64_t>(bi) * cin * hw);
                }
                if (b && b->requires_grad) {
                    T* gb = b->ensure_grad().data();
                    for (int co = 0; co < cout; ++co)
                        gb[co] += k.sum(g + static_cast<std::int64_t>(co) * hw, hw);
                }
            }
        });
}

// (B,C,H,W) -> (B,C) spatial mean.
template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
    const int bsz = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor<T> out{{bsz, c}};
    const auto& k = kernels::K<T>();
    for (int i = 0; i < bsz * c; ++i)
        out[i] = k.sum(x->value.data() + i * hw, hw) / static_cast<T>(hw);
    return make_op<T>(std::move(out), {x}, [x, bsz, c, hw](Node<T>& n) {
        if (!x->requires_grad) return;
        T* gx = x->ensure_grad().data();
        const T inv = T(1) / static_cast<T>(hw);
        for (int i = 0; i < bsz * c; ++i) {
            const T gv = n.grad[i] * inv;
            T* gc = gx + i * hw;
            for (std::int64_t j = 0; j < hw; ++j) gc[j] += gv;
        }
    });
}

// x (B,C,H,W) scaled per (B,C).
template <class T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
    const int bsz = x->value.dim(0), c = x->value.dim(1);
    if (s->value.ndim() != 2 || s->value.dim(0) != bsz || s->value.dim(1) != c)
        throw InvalidShape("channel_scale gate must be (B,C)");
    const std::int64_t hw = static_cast<std::int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor<T> out{x->value.shape()};
    for (int i = 0; i < bsz * c; ++i) {
        const T sv = s->value[i];
        const T* xc = x->value.data() + i * hw;
        T* oc = out.data() + i * hw;
        for (std::int64_t j = 0; j < hw; ++j) oc[j] = xc[j] * sv;
    }
    return make_op<T>(std::move(out), {x, s}, [x, s, bsz, c, hw](Node<T>& n) {
        const auto& k = kernels::K<T>();
        for (int i = 0; i < bsz * c; ++i) {
            const T* g = n.grad.data() + i * hw;
            if (x->requires_grad)
                k.axpy(s->value[i], g, x->ensure_grad().data() + i * hw, hw);
            if (s->requires_grad)
                s->ensure_grad()[i] += k.dot(g, x->value.data() + i * hw, hw);
        }
    });
}

// Batched softmax attention: q (G,R,d), k (G,S,d), v (G,S,dv) -> (G,R,dv).
// logits = scale*q k' (+ bias[g % heads]) (+ -100 where mask says regions
// differ, mask indexed by (g/heads) % nW). Probabilities are kept for the
// backward pass.
template <class T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, double scale,
                 const Var<T>& bias, int heads, idx::MaskVec mask, int num_windows) {
    const int g_count = q->value.dim(0), r = q->value.dim(1), d = q->value.dim(2);
    const int s_count = k->value.dim(1), dv = v->value.dim(2);
    if (k->value.dim(0) != g_count || v->value.dim(0) != g_count || k->value.dim(2) != d ||
        v->value.dim(1) != s_count)
        throw InvalidShape("attention operand shapes inconsistent");
    if (bias && (bias->value.ndim() != 3 || bias->value.dim(0) != heads ||
                 bias->value.dim(1) != r || bias->value.dim(2) != s_count))
        throw InvalidShape("attention bias must be (heads,R,S)");
    const auto& kt = kernels::K<T>();
    auto probs = std::make_shared<Tensor<T>>(Shape{g_count, r, s_count});
    Tensor<T> out{{g_count, r, dv}};
    const std::int64_t rs = static_cast<std::int64_t>(r) * s_count;
    for (int g = 0; g < g_count; ++g) {
        T* p = probs->data() + g * rs;
        kt.gemm_nt(q->value.data() + static_cast<std::int64_t>(g) * r * d,
                   k->value.data() + static_cast<std::int64_t>(g) * s_count * d, p, r, d, s_count,
                   false);
        kt.scale(static_cast<T>(scale), p, rs);
        if (bias)
            kt.axpy(T(1), bias->value.data() + static_cast<std::int64_t>(g % heads) * rs, p, rs);
        if (mask) {
            const std::int8_t* mrow = mask->data() + static_cast<std::int64_t>((g / heads) % num_windows) * rs;
            for (std::int64_t i = 0; i < rs; ++i)
                if (!mrow[i]) p[i] += T(-100);
        }
        for (int row = 0; row < r; ++row) detail::softmax_row(p + static_cast<std::int64_t>(row) * s_count, s_count);
        kt.gemm_nn(p, v->value.data() + static_cast<std::int64_t>(g) * s_count * dv,
                   out.data() + static_cast<std::int64_t>(g) * r * dv, r, s_count, dv, false);
    }
    std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{q, k, v, bias}
                                       : std::vector<Var<T>>{q, k, v};
    return make_op<T>(
        std::move(out), std::move(parents),
        [q, k, v, bias, probs, scale, heads, g_count, r, s_count, d, dv](Node<T>& n) {
            const auto& kt = kernels::K<T>();
            const std::int64_t rs = static_cast<std::int64_t>(r) * s_count;
            std::vector<T> dp(static_cast<size_t>(rs));
            for (int g = 0; g < g_count; ++g) {
                const T* p = probs->data() + g * rs;
                const T* go = n.grad.data() + static_cast<std::int64_t>(g) * r * dv;
                if (v->requires_grad)
                    kt.gemm_tn(p, go,
                               v->ensure_grad().data() + static_cast<std::int64_t>(g) * s_count * dv,
                               s_count, r, dv, true);
                // d logits = P o (dP - rowsum(dP o P))
                kt.gemm_nt(go, v->value.data() + static_cast<std::int64_t>(g) * s_count * dv,
                           dp.data(), r, dv, s_count, false);
                for (int row = 0; row < r; ++row) {
                    T* dpr = dp.data() + static_cast<std::int64_t>(row) * s_count;
                    const T* pr = p + static_cast<std::int64_t>(row) * s_count;
                    const T rowdot = kt.dot(dpr, pr, s_count);
                    for (int j = 0; j < s_count; ++j) dpr[j] = pr[j] * (dpr[j] - rowdot);
                }
                if (bias && bias->requires_grad)
                    kt.axpy(T(1), dp.data(),
                            bias->ensure_grad().data() + static_cast<std::int64_t>(g % heads) * rs,
                            rs);
                kt.scale(static_cast<T>(scale), dp.data(), rs);
                if (q->requires_grad)
                    kt.gemm_nn(dp.data(),
                               k->value.data() + static_cast<std::int64_t>(g) * s_count * d,
                               q->ensure_grad().data() + static_cast<std::int64_t>(g) * r * d, r,
                               s_count, d, true);
                if (k->requires_grad)
                    kt.gemm_tn(dp.data(),
                               q->value.data() + static_cast<std::int64_t>(g) * r * d,
                               k->ensure_grad().data() + static_cast<std::int64_t>(g) * s_count * d,
                               s_count, r, d, true);
            }
        });
}

// Scalar sum of absolute differences.
template <class T>
Var<T> l1_sum(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape() != b->value.shape())
        throw InvalidShape("l1 " + shape_str(a->value.shape()) + " vs " +
                           shape_str(b->value.shape()));
    double s = 0;
    const T* av = a->value.data();
    const T* bv = b->value.data();
    for (std::int64_t i = 0; i < a->value.numel(); ++i)
        s += std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i]));
    Tensor<T> out{{1}};
    out[0] = static_cast<T>(s);
    return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        const T g = n.grad[0];
        const T* av = a->value.data();
        const T* bv = b->value.data();
        T* ga = a->requires_grad ? a->ensure_grad().data() : nullptr;
        T* gb = b->requires_grad ? b->ensure_grad().data() : nullptr;
        for (std::int64_t i = 0; i < a->value.numel(); ++i) {
            const T sgn = av[i] > bv[i] ? g : (av[i] < bv[i] ? -g : T(0));
            if (ga) ga[i] += sgn;
            if (gb) gb[i] -= sgn;
        }
    });
}

// Weighted sum of scalar vars.
template <class T>
Var<T> combine(const std::vector<Var<T>>& xs, const std::vector<double>& cs) {
    double s = 0;
    for (size_t i = 0; i < xs.size(); ++i) s += cs[i] * static_cast<double>(xs[i]->value[0]);
    Tensor<T> out{{1}};
    out[0] = static_cast<T>(s);
    auto coeffs = cs;
    auto parents = xs;
    return make_op<T>(std::move(out), std::vector<Var<T>>(xs.begin(), xs.end()),
                      [parents, coeffs](Node<T>& n) {
                          for (size_t i = 0; i < parents.size(); ++i)
                              if (parents[i]->requires_grad)
                                  parents[i]->ensure_grad()[0] +=
                                      static_cast<T>(coeffs[i]) * n.grad[0];
                      });
}

// Scalar probe sum(x o w) with a constant weight tensor; used by grad checks.
template <class T>
Var<T> inner_const(const Var<T>& x, Tensor<T> w) {
    if (x->value.shape() != w.shape()) throw InvalidShape("inner_const shape mismatch");
    Tensor<T> out{{1}};
    out[0] = kernels::K<T>().dot(x->value.data(), w.data(), w.numel());
    auto wk = std::make_shared<Tensor<T>>(std::move(w));
    return make_op<T>(std::move(out), {x}, [x, wk](Node<T>& n) {
        if (x->requires_grad)
            kernels::K<T>().axpy(n.grad[0], wk->data(), x->ensure_grad().data(), wk->numel());
    });
}

}  // namespace steadapt::ad
