#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "core/ops.hpp"
#include "model/backbone.hpp"
#include "model/config.hpp"
#include "model/params.hpp"

namespace steadapt {

// Bottleneck residual unit inserted inside each attention block. Only the
// branch is computed here; callers add it to the branch input (down-project,
// GELU, up-project; the up projection starts at exactly zero).
template <class T>
struct SpatialAdapter {
    LinearLayer<T> down, up;
    int dim = 0, bottleneck = 0;

    void init(ParamStore<T>& ps, const std::string& name, int d, int bn) {
        dim = d;
        bottleneck = bn;
        down.init(ps, name + ".down", d, bn, true, InitSpec::fan_in(d), InitSpec::fan_in(d));
        up.init(ps, name + ".up", bn, d, true, InitSpec::zeros(), InitSpec::zeros());
    }

    ad::Var<T> branch(const ad::Var<T>& x) const { return up(ad::gelu(down(x))); }
};

// softmax(tau * Q K' / sqrt(C)) V over plain arrays; q (R,C), k/v (S,C).
template <class T>
Tensor<T> temperature_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                double tau) {
    if (tau <= 0) throw InvalidConfig("temperature tau must be positive");
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
        throw InvalidShape("temperature_attention expects 2-D q/k/v");
    if (q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0))
        throw InvalidShape("temperature_attention operand shapes inconsistent");
    if (!q.all_finite() || !k.all_finite() || !v.all_finite())
        throw InvalidInput("temperature_attention: non-finite input");
    const int c = q.dim(1);
    ad::NoGradGuard ng;
    auto wrap = [](const Tensor<T>& t) {
        return ad::constant(t.reshaped({1, t.dim(0), t.dim(1)}));
    };
    ad::Var<T> out = ad::attention(wrap(q), wrap(k), wrap(v),
                                   tau / std::sqrt(static_cast<double>(c)), ad::Var<T>{}, 1,
                                   nullptr, 1);
    return out->value.reshaped({q.dim(0), v.dim(1)});
}

// Cross-view mixer attached after a residual group. Queries come from the
// normalized own view, keys from the normalized other view, values from the
// unnormalized other view; the result is folded back through a learnable
// scalar that starts at zero.
template <class T>
struct StereoAdapter {
    LayerNormLayer<T> norm_l, norm_r;
    LinearLayer<T> w1_l, w1_r, w2_l, w2_r;
    ad::Var<T> gamma_l, gamma_r;
    int dim = 0;
    double tau = 1.0;
    bool row_attention = true;

    void init(ParamStore<T>& ps, const std::string& name, int c, double tau_, bool row) {
        dim = c;
        tau = tau_;
        row_attention = row;
        norm_l.init(ps, name + ".norm_l", c);
        norm_r.init(ps, name + ".norm_r", c);
        w1_l.init(ps, name + ".w1_l", c, c, false);
        w1_r.init(ps, name + ".w1_r", c, c, false);
        w2_l.init(ps, name + ".w2_l", c, c, false);
        w2_r.init(ps, name + ".w2_r", c, c, false);
        gamma_l = ps.create(name + ".gamma_l", {1}, InitSpec::zeros());
        gamma_r = ps.create(name + ".gamma_r", {1}, InitSpec::zeros());
    }

    // Tokens (B,N,C) on an (h,w) grid; row_attention groups by image row.
    std::pair<ad::Var<T>, ad::Var<T>> apply(const ad::Var<T>& xl, const ad::Var<T>& xr, int bsz,
                                            int h, int w) const {
        if (xl->value.shape() != xr->value.shape())
            throw InvalidShape("stereo adapter: view shapes differ, " +
                               shape_str(xl->value.shape()) + " vs " +
                               shape_str(xr->value.shape()));
        const int groups = row_attention ? bsz * h : bsz;
        const int rows = row_attention ? w : h * w;
        const Shape gshape{groups, rows, dim};
        ad::Var<T> ql = ad::reshape(w1_l(norm_l(xl)), gshape);
        ad::Var<T> qr = ad::reshape(w1_r(norm_r(xr)), gshape);
        ad::Var<T> vl = ad::reshape(w2_l(xl), gshape);
        ad::Var<T> vr = ad::reshape(w2_r(xr), gshape);
        const double scale = tau / std::sqrt(static_cast<double>(dim));
        ad::Var<T> f_rl = ad::attention(ql, qr, vr, scale, ad::Var<T>{}, 1, nullptr, 1);
        ad::Var<T> f_lr = ad::attention(qr, ql, vl, scale, ad::Var<T>{}, 1, nullptr, 1);
        const Shape tshape = xl->value.shape();
        ad::Var<T> out_l = ad::scale_add(xl, ad::reshape(f_rl, tshape), gamma_l);
        ad::Var<T> out_r = ad::scale_add(xr, ad::reshape(f_lr, tshape), gamma_r);
        return {out_l, out_r};
    }
};

// Feature-map front end for the stereo adapter: (B,C,H,W) per view.
template <class T>
std::pair<Tensor<T>, Tensor<T>> stereo_adapter_forward(const Tensor<T>& x_left,
                                                       const Tensor<T>& x_right,
                                                       const StereoAdapter<T>& p) {
    if (x_left.shape() != x_right.shape())
        throw InvalidShape("stereo_adapter_forward: view shapes differ");
    if (x_left.ndim() != 4 || x_left.dim(1) != p.dim)
        throw InvalidShape("stereo_adapter_forward expects (B,C,H,W) with C=" +
                           std::to_string(p.dim));
    const int b = x_left.dim(0), c = x_left.dim(1), h = x_left.dim(2), w = x_left.dim(3);
    ad::NoGradGuard ng;
    ad::Var<T> tl = fmap_to_tokens(ad::constant(x_left), b, c, h, w);
    ad::Var<T> tr = fmap_to_tokens(ad::constant(x_right), b, c, h, w);
    auto [ol, orr] = p.apply(tl, tr, b, h, w);
    return {tokens_to_fmap(ol, b, c, h, w)->value, tokens_to_fmap(orr, b, c, h, w)->value};
}

// Adapter branch on a plain token grid; returns only up(GELU(down(x))).
template <class T>
Tensor<T> spatial_adapter_forward(const Tensor<T>& x, const SpatialAdapter<T>& p) {
    if (x.ndim() < 1 || x.shape().back() != p.dim)
        throw InvalidShape("spatial_adapter_forward: last dim must be " + std::to_string(p.dim));
    ad::NoGradGuard ng;
    return p.branch(ad::constant(x))->value;
}

}  // namespace steadapt
