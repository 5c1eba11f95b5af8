#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "model/config.hpp"
#include "model/params.hpp"

namespace steadapt {

// (B, N, D) tokens plus the grid they came from. N == h*w always.
template <class T>
struct TokenGrid {
    ad::Var<T> x;
    int h = 0, w = 0;
};

template <class T>
struct LinearLayer {
    ad::Var<T> w, b;

    void init(ParamStore<T>& ps, const std::string& name, int in, int out, bool bias = true,
              InitSpec wspec = InitSpec{InitKind::fan_in_uniform, -1},
              InitSpec bspec = InitSpec::zeros()) {
        if (wspec.kind == InitKind::fan_in_uniform && wspec.arg < 0) wspec.arg = in;
        w = ps.create(name + ".weight", {out, in}, wspec);
        if (bias) b = ps.create(name + ".bias", {out}, bspec);
    }

    ad::Var<T> operator()(const ad::Var<T>& x) const {
        return b ? ad::linear(x, w, b) : ad::linear(x, w);
    }
};

template <class T>
struct LayerNormLayer {
    ad::Var<T> scale, shift;

    void init(ParamStore<T>& ps, const std::string& name, int dim) {
        scale = ps.create(name + ".scale", {dim}, InitSpec::ones());
        shift = ps.create(name + ".shift", {dim}, InitSpec::zeros());
    }

    ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::layer_norm(x, scale, shift); }
};

template <class T>
struct ConvLayer {
    ad::Var<T> w, b;

    void init(ParamStore<T>& ps, const std::string& name, int in, int out, int k) {
        w = ps.create(name + ".weight", {out, in, k, k}, InitSpec::fan_in(in * k * k));
        b = ps.create(name + ".bias", {out}, InitSpec::zeros());
    }

    ad::Var<T> operator()(const ad::Var<T>& x) const { return ad::conv2d(x, w, b); }
};

// ---------------------------------------------------------------------------

template <class T>
ad::Var<T> tokens_to_fmap(const ad::Var<T>& x, int b, int c, int h, int w) {
    return ad::gather(x, idx::bnc_to_bchw(b, c, h, w), {b, c, h, w});
}

template <class T>
ad::Var<T> fmap_to_tokens(const ad::Var<T>& x, int b, int c, int h, int w) {
    return ad::gather(x, idx::bchw_to_bnc(b, c, h, w), {b, h * w, c});
}

// Multi-head self-attention inside (optionally shifted) windows, with a
// learned relative-position bias per head.
template <class T>
struct WindowAttention {
    LinearLayer<T> qkv, proj;
    ad::Var<T> rel_bias;  // ((2w-1)^2, heads)
    int dim = 0, heads = 0, window = 0;

    void init(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg) {
        dim = cfg.embed_dim;
        heads = cfg.num_heads;
        window = cfg.window_size;
        qkv.init(ps, name + ".qkv", dim, 3 * dim);
        proj.init(ps, name + ".proj", dim, dim);
        const int span = 2 * window - 1;
        rel_bias = ps.create(name + ".rel_bias", {span * span, heads}, InitSpec::normal(0.02));
    }

    // x: (B,N,D) on an (h,w) grid already padded to multiples of window.
    ad::Var<T> operator()(const ad::Var<T>& x, int bsz, int h, int w, bool shifted) const {
        if (h % window != 0 || w % window != 0)
            throw InvalidShape("grid " + std::to_string(h) + "x" + std::to_string(w) +
                               " not divisible by window " + std::to_string(window));
        const int n = h * w;
        const int hd = dim / heads;
        const int ws2 = window * window;
        const int nw = (h / window) * (w / window);
        const int shift = shifted ? window / 2 : 0;
        ad::Var<T> qkv_out = ad::reshape(qkv(x), {bsz * n, 3 * dim});
        const Shape part_shape{bsz * nw * heads, ws2, hd};
        ad::Var<T> q = ad::gather(qkv_out, idx::window_qkv(bsz, h, w, dim, heads, window, shift, 0),
                                  part_shape);
        ad::Var<T> k = ad::gather(qkv_out, idx::window_qkv(bsz, h, w, dim, heads, window, shift, 1),
                                  part_shape);
        ad::Var<T> v = ad::gather(qkv_out, idx::window_qkv(bsz, h, w, dim, heads, window, shift, 2),
                                  part_shape);
        ad::Var<T> bias =
            ad::gather(rel_bias, idx::rel_bias(heads, window), {heads, ws2, ws2});
        idx::MaskVec mask = shift > 0 ? idx::shift_mask(h, w, window, shift) : nullptr;
        ad::Var<T> att =
            ad::attention(q, k, v, 1.0 / std::sqrt(static_cast<double>(hd)), bias, heads, mask, nw);
        ad::Var<T> merged = ad::gather(att, idx::window_merge(bsz, h, w, dim, heads, window, shift),
                                       {bsz, n, dim});
        return proj(merged);
    }
};

// Two 3x3 convolutions with a squeeze/excite gate, on the feature map.
template <class T>
struct ChannelAttentionBlock {
    ConvLayer<T> conv1, conv2;
    LinearLayer<T> se1, se2;
    int dim = 0, mid = 0;

    void init(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg) {
        dim = cfg.embed_dim;
        mid = cfg.embed_dim / cfg.cab_squeeze;
        conv1.init(ps, name + ".conv1", dim, mid, 3);
        conv2.init(ps, name + ".conv2", mid, dim, 3);
        se1.init(ps, name + ".se1", dim, mid);
        se2.init(ps, name + ".se2", mid, dim);
    }

    ad::Var<T> operator()(const ad::Var<T>& fmap) const {
        ad::Var<T> y = conv2(ad::gelu(conv1(fmap)));
        ad::Var<T> gate = ad::sigmoid(se2(ad::relu(se1(ad::global_avg_pool(y)))));
        return ad::channel_scale(y, gate);
    }
};

template <class T>
struct Mlp {
    LinearLayer<T> fc1, fc2;

    void init(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg) {
        fc1.init(ps, name + ".fc1", cfg.embed_dim, cfg.mlp_hidden());
        fc2.init(ps, name + ".fc2", cfg.mlp_hidden(), cfg.embed_dim);
    }

    ad::Var<T> operator()(const ad::Var<T>& x) const { return fc2(ad::gelu(fc1(x))); }
};

}  // namespace steadapt
