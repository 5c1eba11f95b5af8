#include <doctest.h>

#include "model/stereo_model.hpp"
#include "testutil.hpp"

using namespace steadapt;
using testutil::random_tensor;

namespace {

BackboneConfig toy_cfg() {
    BackboneConfig cfg;
    cfg.embed_dim = 32;
    cfg.num_groups = 2;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 4;
    cfg.window_size = 4;
    cfg.scale = 2;
    return cfg;
}

template <class T>
void zero_param(StereoModel<T>& m, const std::string& name) {
    m.params().at(name).var->value.fill(T(0));
}

}  // namespace

TEST_CASE("embed_features shapes and round trip") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 1);

    // feature map already at embed width: pure layout change
    Rng rng(2);
    auto feat = random_tensor<double>(rng, {1, 32, 8, 8});
    auto tg = m.embed_features(feat);
    CHECK(tg.x->value.shape() == Shape{1, 64, 32});
    CHECK(tg.h == 8);
    CHECK(tg.w == 8);

    // round trip is exact
    auto feat2 = random_tensor<double>(rng, {2, 32, 6, 10});
    auto tg2 = m.embed_features(feat2);
    ad::NoGradGuard ng;
    auto back = tokens_to_fmap(tg2.x, 2, 32, 6, 10);
    CHECK(max_abs_diff(back->value, feat2) == 0.0);

    // image input goes through the shallow conv first
    auto img = random_tensor<double>(rng, {1, 3, 16, 16});
    auto tg3 = m.embed_features(img);
    CHECK(tg3.x->value.shape() == Shape{1, 256, 32});

    CHECK_THROWS_AS(m.embed_features(random_tensor<double>(rng, {1, 5, 8, 8})), InvalidShape);
}

TEST_CASE("window attention: constant input with zero bias reduces to the value path") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 3);
    auto& blk = const_cast<ResidualGroup<double>&>(m.groups()[0]).blocks[0];
    blk.attn.rel_bias->value.fill(0.0);

    Tensor<double> x({1, 64, 32}, 0.37);
    ad::NoGradGuard ng;
    auto out = blk.attn(ad::constant(x), 1, 8, 8, false);

    // identical tokens: attention averages identical V rows, so the result is
    // proj(v(x)) for any single token
    auto xv = ad::constant(x);
    auto qkv = ad::linear(xv, blk.attn.qkv.w, blk.attn.qkv.b);
    Tensor<double> v_slice({1, 64, 32});
    for (int n = 0; n < 64; ++n)
        for (int c = 0; c < 32; ++c) v_slice[n * 32 + c] = qkv->value[n * 96 + 64 + c];
    auto want = ad::linear(ad::constant(v_slice), blk.attn.proj.w, blk.attn.proj.b);
    CHECK(max_abs_diff(out->value, want->value) < 1e-9);
}

TEST_CASE("single window equals brute-force full attention") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 4);
    const auto& blk = m.groups()[0].blocks[0];
    const int ws = cfg.window_size, d = cfg.embed_dim, heads = cfg.num_heads;
    const int n = ws * ws, hd = d / heads;

    Rng rng(5);
    auto x = random_tensor<double>(rng, {1, n, d});
    ad::NoGradGuard ng;
    auto got = blk.attn(ad::constant(x), 1, ws, ws, false);

    // oracle: per head, softmax(q k'/sqrt(hd) + bias) v, then out-projection
    auto qkv = ad::linear(ad::constant(x), blk.attn.qkv.w, blk.attn.qkv.b);
    Tensor<double> merged({1, n, d});
    for (int h = 0; h < heads; ++h) {
        std::vector<double> q(static_cast<size_t>(n) * hd), k(q.size()), v(q.size());
        for (int i = 0; i < n; ++i)
            for (int e = 0; e < hd; ++e) {
                q[static_cast<size_t>(i) * hd + e] = qkv->value[i * 3 * d + 0 * d + h * hd + e];
                k[static_cast<size_t>(i) * hd + e] = qkv->value[i * 3 * d + 1 * d + h * hd + e];
                v[static_cast<size_t>(i) * hd + e] = qkv->value[i * 3 * d + 2 * d + h * hd + e];
            }
        // logits built by hand so we can add the positional bias
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        for (int i = 0; i < n; ++i) {
            std::vector<double> logits(static_cast<size_t>(n));
            double mx = -1e300;
            for (int j = 0; j < n; ++j) {
                double dot = 0;
                for (int e = 0; e < hd; ++e)
                    dot += q[static_cast<size_t>(i) * hd + e] * k[static_cast<size_t>(j) * hd + e];
                const int ry = i / ws - j / ws + ws - 1;
                const int rx = i % ws - j % ws + ws - 1;
                const double bias =
                    blk.attn.rel_bias->value[(ry * (2 * ws - 1) + rx) * heads + h];
                logits[static_cast<size_t>(j)] = dot * scale + bias;
                mx = std::max(mx, logits[static_cast<size_t>(j)]);
            }
            double z = 0;
            for (double& l : logits) {
                l = std::exp(l - mx);
                z += l;
            }
            for (int e = 0; e < hd; ++e) {
                double acc = 0;
                for (int j = 0; j < n; ++j)
                    acc += logits[static_cast<size_t>(j)] / z * v[static_cast<size_t>(j) * hd + e];
                merged[i * d + h * hd + e] = acc;
            }
        }
    }
    auto want = ad::linear(ad::constant(merged), blk.attn.proj.w, blk.attn.proj.b);
    CHECK(max_abs_diff(got->value, want->value) < 1e-6);
}

TEST_CASE("window attention keeps shape with shift") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 6);
    Rng rng(7);
    auto x = random_tensor<double>(rng, {1, 64, 32});
    ad::NoGradGuard ng;
    auto out = m.groups()[0].blocks[1].attn(ad::constant(x), 1, 8, 8, true);
    CHECK(out->value.shape() == Shape{1, 64, 32});
    CHECK(out->value.all_finite());
}

TEST_CASE("channel attention block") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 8);
    const auto& cab = m.groups()[0].blocks[0].cab;
    ad::NoGradGuard ng;

    SUBCASE("zero input maps to zero") {
        auto out = cab(ad::constant(Tensor<double>::zeros({1, 32, 8, 8})));
        CHECK(max_abs_diff(out->value, Tensor<double>::zeros({1, 32, 8, 8})) == 0.0);
    }
    SUBCASE("shape preserved and gate stays in (0,1)") {
        Rng rng(9);
        auto x = random_tensor<double>(rng, {1, 32, 8, 8}, -3.0, 3.0);
        auto y = cab(ad::constant(x));
        CHECK(y->value.shape() == Shape{1, 32, 8, 8});
        // the gate itself: sigmoid output of the squeeze/excite path
        auto gate = ad::sigmoid(cab.se2(ad::relu(cab.se1(ad::global_avg_pool(
            cab.conv2(ad::gelu(cab.conv1(ad::constant(x)))))))));
        for (std::int64_t i = 0; i < gate->value.numel(); ++i) {
            CHECK(gate->value[i] > 0.0);
            CHECK(gate->value[i] < 1.0);
        }
    }
    SUBCASE("cab_squeeze must divide embed_dim") {
        auto bad = toy_cfg();
        bad.cab_squeeze = 5;
        CHECK_THROWS_AS((StereoModel<double>(bad, {}, 0)), InvalidConfig);
    }
}

TEST_CASE("hab_forward: zero-init adapter preserves the block output") {
    auto cfg = toy_cfg();
    InjectionPlan plan;
    plan.spatial = true;
    StereoModel<double> with(cfg, plan, 11);
    StereoModel<double> without(cfg, {}, 11);
    Rng rng(12);
    auto x = random_tensor<double>(rng, {1, 64, 32});
    ad::NoGradGuard ng;
    auto a = hab_forward(with.groups()[0].blocks[0], ad::constant(x), 1, 8, 8, false,
                         cfg.cab_weight);
    auto b = hab_forward(without.groups()[0].blocks[0], ad::constant(x), 1, 8, 8, false,
                         cfg.cab_weight);
    CHECK(max_abs_diff(a->value, b->value) == 0.0);
}

TEST_CASE("hab_forward with zero cab weight equals attention plus mlp composition") {
    auto cfg = toy_cfg();
    StereoModel<double> m(cfg, {}, 13);
    const auto& blk = m.groups()[0].blocks[0];
    Rng rng(14);
    auto xt = random_tensor<double>(rng, {1, 64, 32});
    ad::NoGradGuard ng;
    auto got = hab_forward(blk, ad::constant(xt), 1, 8, 8, false, /*cab_weight=*/0.0);

    auto x = ad::constant(xt);
    auto ihat = ad::add(blk.attn(blk.norm1(x), 1, 8, 8, false), x);
    auto want = ad::add(blk.mlp(blk.norm2(ihat)), ihat);
    CHECK(max_abs_diff(got->value, want->value) < 1e-12);
}

TEST_CASE("hab_forward gradient on an mlp weight matches finite differences") {
    auto cfg = toy_cfg();
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    StereoModel<double> m(cfg, {}, 15);
    auto& blk = const_cast<ResidualGroup<double>&>(m.groups()[0]).blocks[0];
    Rng rng(16);
    auto xt = random_tensor<double>(rng, {1, 16, 8});
    auto target = random_tensor<double>(rng, {1, 16, 8});
    auto loss = [&] {
        auto out = hab_forward(blk, ad::constant(xt), 1, 4, 4, false, cfg.cab_weight);
        return ad::combine<double>({ad::l1_sum(out, ad::constant(target))}, {1.0 / 128});
    };
    auto res = testutil::grad_check(loss, {{"mlp.fc1.w", blk.mlp.fc1.w}}, 1e-3);
    CHECK_MESSAGE(res.max_rel_err < 1e-3, res.worst);
}

TEST_CASE("rhag_forward") {
    auto cfg = toy_cfg();

    SUBCASE("zero-init adapters match the adapter-free group") {
        InjectionPlan plan;
        plan.spatial = true;
        StereoModel<double> with(cfg, plan, 17);
        StereoModel<double> without(cfg, {}, 17);
        Rng rng(18);
        auto x = random_tensor<double>(rng, {1, 64, 32});
        ad::NoGradGuard ng;
        auto a = rhag_forward(with.groups()[0], ad::constant(x), 1, 8, 8, cfg);
        auto b = rhag_forward(without.groups()[0], ad::constant(x), 1, 8, 8, cfg);
        CHECK(max_abs_diff(a->value, b->value) == 0.0);
        CHECK(a->value.shape() == Shape{1, 64, 32});
    }

    SUBCASE("zeroed branches reduce the group to the identity") {
        StereoModel<double> m(cfg, {}, 19);
        for (int j = 0; j < cfg.blocks_per_group; ++j) {
            const std::string base = "backbone.body.g0.b" + std::to_string(j) + ".";
            // zero the value slice of the fused qkv projection
            auto& qkv_w = m.params().at(base + "attn.qkv.weight").var->value;
            for (int o = 2 * 32; o < 3 * 32; ++o)
                for (int i = 0; i < 32; ++i) qkv_w[o * 32 + i] = 0.0;
            zero_param(m, base + "cab.conv1.weight");
            zero_param(m, base + "cab.conv2.weight");
            zero_param(m, base + "mlp.fc2.weight");
        }
        zero_param(m, "backbone.body.g0.conv.weight");
        Rng rng(20);
        auto x = random_tensor<double>(rng, {1, 64, 32});
        ad::NoGradGuard ng;
        auto out = rhag_forward(m.groups()[0], ad::constant(x), 1, 8, 8, cfg);
        CHECK(max_abs_diff(out->value, x) < 1e-12);
    }

    SUBCASE("adapter list length is fixed by the plan") {
        InjectionPlan plan;
        plan.spatial = true;
        StereoModel<double> m(cfg, plan, 21);
        for (const auto& blk : m.groups()[0].blocks) CHECK(blk.adapter.has_value());
    }
}

TEST_CASE("backbone_forward shape contracts and determinism") {
    auto cfg = toy_cfg();

    SUBCASE("scale 4") {
        auto c4 = cfg;
        c4.scale = 4;
        StereoModel<float> m(c4, {}, 22);
        Rng rng(23);
        auto img = random_tensor<float>(rng, {1, 3, 16, 24}, 0.0, 1.0);
        auto out = m.infer_single(img);
        CHECK(out.shape() == Shape{1, 3, 64, 96});
    }

    SUBCASE("scale 2") {
        StereoModel<float> m(cfg, {}, 24);
        Rng rng(25);
        auto img = random_tensor<float>(rng, {1, 3, 8, 8}, 0.0, 1.0);
        auto out = m.infer_single(img);
        CHECK(out.shape() == Shape{1, 3, 16, 16});
    }

    SUBCASE("bitwise deterministic") {
        StereoModel<float> m(cfg, {}, 26);
        Rng rng(27);
        auto img = random_tensor<float>(rng, {1, 3, 10, 14}, 0.0, 1.0);
        auto a = m.infer_single(img);
        auto b = m.infer_single(img);
        CHECK(max_abs_diff(a, b) == 0.0);
    }

    SUBCASE("non-finite input is rejected") {
        StereoModel<float> m(cfg, {}, 28);
        Tensor<float> img({1, 3, 8, 8}, 0.5f);
        img[10] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_AS(m.infer_single(img), InvalidInput);
    }

    SUBCASE("non-multiple sizes go through reflect pad and crop") {
        StereoModel<float> m(cfg, {}, 29);
        Rng rng(30);
        auto img = random_tensor<float>(rng, {1, 3, 7, 11}, 0.0, 1.0);
        auto out = m.infer_single(img);
        CHECK(out.shape() == Shape{1, 3, 14, 22});
        CHECK(out.all_finite());
    }
}

TEST_CASE("backbone gradients match finite differences on sampled parameters") {
    BackboneConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_groups = 1;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 2;
    cfg.window_size = 4;
    cfg.scale = 2;
    StereoModel<double> m(cfg, {}, 31);
    Rng rng(32);
    auto img = random_tensor<double>(rng, {1, 3, 4, 4}, 0.0, 1.0);
    auto target = random_tensor<double>(rng, {1, 3, 8, 8}, 0.0, 1.0);
    auto loss = [&] {
        auto out = m.forward_single(ad::constant(img));
        return ad::combine<double>({ad::l1_sum(out, ad::constant(target))},
                                   {1.0 / static_cast<double>(target.numel())});
    };

    // sample 20 parameters across the graph deterministically
    std::vector<std::pair<std::string, ad::Var<double>>> sampled;
    Rng pick(33);
    std::vector<std::string> names;
    for (const auto& [name, e] : m.params().entries()) names.push_back(name);
    while (sampled.size() < 20) {
        const std::string& n = names[pick.index(names.size())];
        bool dup = false;
        for (auto& [sn, sv] : sampled) dup |= sn == n;
        if (!dup) sampled.emplace_back(n, m.params().at(n).var);
    }
    auto res = testutil::grad_check(loss, sampled, 1e-3, 2);
    CHECK_MESSAGE(res.max_rel_err < 1e-3, res.worst);
}
