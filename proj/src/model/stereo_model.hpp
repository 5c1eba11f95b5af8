#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "model/adapters.hpp"
#include "model/backbone.hpp"

namespace steadapt {

template <class T>
ad::Var<T> pixel_shuffle_op(const ad::Var<T>& x, int r) {
    const int b = x->value.dim(0), cin = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    if (cin % (r * r) != 0) throw InvalidShape("pixel shuffle channels not divisible by r^2");
    const int c = cin / (r * r);
    return ad::gather(x, idx::pixel_shuffle(b, c, r, h, w), {b, c, h * r, w * r});
}

template <class T>
struct HybridAttentionBlock {
    LayerNormLayer<T> norm1, norm2;
    WindowAttention<T> attn;
    ChannelAttentionBlock<T> cab;
    Mlp<T> mlp;
    std::optional<SpatialAdapter<T>> adapter;       // after the hybrid attention
    std::optional<SpatialAdapter<T>> adapter_post;  // extra unit after the MLP (variant a)
    Placement placement = Placement::after_ha;

    void init(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg) {
        norm1.init(ps, name + ".norm1", cfg.embed_dim);
        norm2.init(ps, name + ".norm2", cfg.embed_dim);
        attn.init(ps, name + ".attn", cfg);
        cab.init(ps, name + ".cab", cfg);
        mlp.init(ps, name + ".mlp", cfg);
    }

    void attach_adapter(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg,
                        const InjectionPlan& plan) {
        placement = plan.placement;
        const int d = plan.bottleneck_dim(cfg);
        adapter.emplace();
        adapter->init(ps, name, cfg.embed_dim, d);
        if (placement == Placement::after_mlp_extra) {
            adapter_post.emplace();
            adapter_post->init(ps, name + ".post_mlp", cfg.embed_dim, d);
        }
    }
};

// One attention block: hybrid attention (window MSA + weighted conv branch),
// optional bottleneck adapter, then the MLP tail. Both residuals live here.
template <class T>
ad::Var<T> hab_forward(const HybridAttentionBlock<T>& blk, const ad::Var<T>& x, int bsz, int h,
                       int w, bool shifted, double cab_weight) {
    ad::Var<T> xn = blk.norm1(x);
    ad::Var<T> att = blk.attn(xn, bsz, h, w, shifted);
    ad::Var<T> cab_fm = blk.cab(tokens_to_fmap(xn, bsz, blk.attn.dim, h, w));
    ad::Var<T> ha = ad::add_scaled(att, fmap_to_tokens(cab_fm, bsz, blk.attn.dim, h, w),
                                   cab_weight);
    ad::Var<T> branch = ha;
    if (blk.adapter) {
        if (blk.placement == Placement::parallel)
            branch = ad::add(ha, blk.adapter->branch(xn));
        else
            branch = ad::add(ha, blk.adapter->branch(ha));
    }
    ad::Var<T> ihat = ad::add(branch, x);
    ad::Var<T> m = blk.mlp(blk.norm2(ihat));
    if (blk.adapter_post) m = ad::add(m, blk.adapter_post->branch(m));
    return ad::add(m, ihat);
}

template <class T>
struct ResidualGroup {
    std::vector<HybridAttentionBlock<T>> blocks;
    ConvLayer<T> conv;

    void init(ParamStore<T>& ps, const std::string& name, const BackboneConfig& cfg) {
        blocks.resize(static_cast<size_t>(cfg.blocks_per_group));
        for (int j = 0; j < cfg.blocks_per_group; ++j)
            blocks[static_cast<size_t>(j)].init(ps, name + ".b" + std::to_string(j), cfg);
        conv.init(ps, name + ".conv", cfg.embed_dim, cfg.embed_dim, 3);
    }
};

// Blocks with alternating shift, a 3x3 convolution, and the group residual.
template <class T>
ad::Var<T> rhag_forward(const ResidualGroup<T>& grp, const ad::Var<T>& x, int bsz, int h, int w,
                        const BackboneConfig& cfg) {
    const bool allow_shift = std::min(h, w) > cfg.window_size;
    ad::Var<T> t = x;
    for (size_t j = 0; j < grp.blocks.size(); ++j)
        t = hab_forward(grp.blocks[j], t, bsz, h, w, (j % 2 == 1) && allow_shift, cfg.cab_weight);
    ad::Var<T> fm = grp.conv(tokens_to_fmap(t, bsz, cfg.embed_dim, h, w));
    return ad::add(fmap_to_tokens(fm, bsz, cfg.embed_dim, h, w), x);
}

// Frozen-style backbone plus injected adapters. Both views run through the
// same weights; cross-view mixers sit between selected groups.
template <class T>
class StereoModel {
public:
    StereoModel(BackboneConfig cfg, InjectionPlan plan, std::uint64_t seed)
        : cfg_(cfg), plan_(std::move(plan)), params_(seed) {
        cfg_.validate();
        plan_.validate(cfg_);
        conv_first_.init(params_, "backbone.conv_first", cfg_.img_channels, cfg_.embed_dim, 3);
        groups_.resize(static_cast<size_t>(cfg_.num_groups));
        for (int g = 0; g < cfg_.num_groups; ++g) {
            const std::string gname = "backbone.body.g" + std::to_string(g);
            groups_[static_cast<size_t>(g)].init(params_, gname, cfg_);
            if (plan_.spatial)
                for (int j = 0; j < cfg_.blocks_per_group; ++j)
                    groups_[static_cast<size_t>(g)].blocks[static_cast<size_t>(j)].attach_adapter(
                        params_,
                        "adapter.spatial.g" + std::to_string(g) + ".b" + std::to_string(j), cfg_,
                        plan_);
        }
        for (int s : plan_.stereo_sites) {
            StereoAdapter<T> sa;
            sa.init(params_, "adapter.stereo.g" + std::to_string(s), cfg_.embed_dim, plan_.tau,
                    plan_.row_attention);
            stereo_.emplace(s, std::move(sa));
        }
        conv_after_body_.init(params_, "backbone.conv_after_body", cfg_.embed_dim, cfg_.embed_dim,
                              3);
        conv_before_up_.init(params_, "backbone.tail.conv_before", cfg_.embed_dim, cfg_.embed_dim,
                             3);
        const int stages = cfg_.scale == 4 ? 2 : 1;
        up_.resize(static_cast<size_t>(stages));
        for (int s = 0; s < stages; ++s)
            up_[static_cast<size_t>(s)].init(params_, "backbone.tail.up" + std::to_string(s),
                                             cfg_.embed_dim, 4 * cfg_.embed_dim, 3);
        conv_last_.init(params_, "backbone.tail.conv_last", cfg_.embed_dim, cfg_.img_channels, 3);
    }

    const BackboneConfig& config() const { return cfg_; }
    const InjectionPlan& plan() const { return plan_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const std::map<int, StereoAdapter<T>>& stereo_adapters() const { return stereo_; }
    const std::vector<ResidualGroup<T>>& groups() const { return groups_; }

    // Patch embedding: accepts either an image (shallow conv applied) or a
    // feature map already at embed_dim width.
    TokenGrid<T> embed_features(const Tensor<T>& in) const {
        if (in.ndim() != 4) throw InvalidShape("embed_features expects a 4-D array");
        const int b = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
        ad::Var<T> v = ad::constant(in);
        if (c == cfg_.img_channels && c != cfg_.embed_dim) v = conv_first_(v);
        else if (c != cfg_.embed_dim)
            throw InvalidShape("embed_features: channels " + std::to_string(c) +
                               " match neither img_channels nor embed_dim");
        return {fmap_to_tokens(v, b, cfg_.embed_dim, h, w), h, w};
    }

    std::pair<ad::Var<T>, ad::Var<T>> forward_pair(const ad::Var<T>& left,
                                                   const ad::Var<T>& right) const {
        Stream l = head(left);
        Stream r = head(right);
        for (int g = 0; g < cfg_.num_groups; ++g) {
            l.tokens = rhag_forward(groups_[static_cast<size_t>(g)], l.tokens, l.b, l.hp, l.wp,
                                    cfg_);
            r.tokens = rhag_forward(groups_[static_cast<size_t>(g)], r.tokens, r.b, r.hp, r.wp,
                                    cfg_);
            auto it = stereo_.find(g);
            if (it != stereo_.end()) {
                if (l.hp != r.hp || l.wp != r.wp || l.b != r.b)
                    throw InvalidShape("stereo views must share shapes");
                auto [nl, nr] = it->second.apply(l.tokens, r.tokens, l.b, l.hp, l.wp);
                l.tokens = nl;
                r.tokens = nr;
            }
        }
        return {tail(l), tail(r)};
    }

    // Single-image path: identical weights, no cross-view mixing.
    ad::Var<T> forward_single(const ad::Var<T>& img) const {
        Stream s = head(img);
        for (int g = 0; g < cfg_.num_groups; ++g)
            s.tokens = rhag_forward(groups_[static_cast<size_t>(g)], s.tokens, s.b, s.hp, s.wp,
                                    cfg_);
        return tail(s);
    }

    std::pair<Tensor<T>, Tensor<T>> infer_pair(const Tensor<T>& left,
                                               const Tensor<T>& right) const {
        ad::NoGradGuard ng;
        auto [l, r] = forward_pair(ad::constant(left), ad::constant(right));
        return {l->value, r->value};
    }

    Tensor<T> infer_single(const Tensor<T>& img) const {
        ad::NoGradGuard ng;
        return forward_single(ad::constant(img))->value;
    }

private:
    struct Stream {
        ad::Var<T> shallow;  // (B,D,H,W) pre-padding
        ad::Var<T> tokens;   // (B,N,D) on the padded grid
        int b = 0, h = 0, w = 0, hp = 0, wp = 0;
    };

    Stream head(const ad::Var<T>& img) const {
        if (img->value.ndim() != 4 || img->value.dim(1) != cfg_.img_channels)
            throw InvalidShape("backbone input must be (B," + std::to_string(cfg_.img_channels) +
                               ",H,W), got " + shape_str(img->value.shape()));
        if (!img->value.all_finite()) throw InvalidInput("backbone input contains non-finite values");
        Stream s;
        s.b = img->value.dim(0);
        s.h = img->value.dim(2);
        s.w = img->value.dim(3);
        const int ws = cfg_.window_size;
        s.hp = (s.h + ws - 1) / ws * ws;
        s.wp = (s.w + ws - 1) / ws * ws;
        s.shallow = conv_first_(img);
        ad::Var<T> padded = s.shallow;
        if (s.hp != s.h || s.wp != s.w)
            padded = ad::gather(s.shallow,
                                idx::pad_reflect_br(s.b, cfg_.embed_dim, s.h, s.w, s.hp - s.h,
                                                    s.wp - s.w),
                                {s.b, cfg_.embed_dim, s.hp, s.wp});
        s.tokens = fmap_to_tokens(padded, s.b, cfg_.embed_dim, s.hp, s.wp);
        return s;
    }

    ad::Var<T> tail(const Stream& s) const {
        ad::Var<T> fm = tokens_to_fmap(s.tokens, s.b, cfg_.embed_dim, s.hp, s.wp);
        if (s.hp != s.h || s.wp != s.w)
            fm = ad::gather(fm, idx::crop_tl(s.b, cfg_.embed_dim, s.hp, s.wp, s.h, s.w),
                            {s.b, cfg_.embed_dim, s.h, s.w});
        ad::Var<T> feat = ad::add(conv_after_body_(fm), s.shallow);
        ad::Var<T> t = ad::leaky_relu(conv_before_up_(feat));
        for (const auto& upconv : up_) t = pixel_shuffle_op(upconv(t), 2);
        return conv_last_(t);
    }

    BackboneConfig cfg_;
    InjectionPlan plan_;
    ParamStore<T> params_;
    ConvLayer<T> conv_first_, conv_after_body_, conv_before_up_, conv_last_;
    std::vector<ConvLayer<T>> up_;
    std::vector<ResidualGroup<T>> groups_;
    std::map<int, StereoAdapter<T>> stereo_;
};

}  // namespace steadapt
