#include <doctest.h>

#include <set>

#include "train/trainer.hpp"
#include "testutil.hpp"

using namespace steadapt;
using testutil::random_tensor;

namespace {

BackboneConfig tiny_cfg() {
    BackboneConfig cfg;
    cfg.embed_dim = 16;
    cfg.num_groups = 1;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 2;
    cfg.window_size = 4;
    cfg.scale = 2;
    return cfg;
}

InjectionPlan tiny_plan() {
    InjectionPlan plan;
    plan.spatial = true;
    plan.stereo_sites = {0};
    return plan;
}

Batch tiny_batch(std::uint64_t seed, int b = 1, int h = 8, int w = 8, int scale = 2) {
    Rng rng(seed);
    Batch batch{random_tensor<float>(rng, {b, 3, h, w}, 0.0, 1.0),
                random_tensor<float>(rng, {b, 3, h, w}, 0.0, 1.0),
                random_tensor<float>(rng, {b, 3, h * scale, w * scale}, 0.0, 1.0),
                random_tensor<float>(rng, {b, 3, h * scale, w * scale}, 0.0, 1.0)};
    return batch;
}

std::map<std::string, Tensor<float>> snapshot_values(const StereoModel<float>& m) {
    std::map<std::string, Tensor<float>> out;
    for (const auto& [name, e] : m.params().entries()) out.emplace(name, e.var->value.clone());
    return out;
}

}  // namespace

TEST_CASE("l1 loss") {
    Rng rng(1);
    auto a = random_tensor<float>(rng, {1, 3, 4, 4});
    SUBCASE("zero for identical inputs") {
        CHECK(l1_loss_value(a, a, a, a) == 0.0);
    }
    SUBCASE("constant offset") {
        Tensor<float> b = a.clone();
        for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += 0.5f;
        CHECK(l1_loss_value(b, a, b, a) == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("one view off by one, the other exact") {
        Tensor<float> b = a.clone();
        for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += 1.0f;
        CHECK(l1_loss_value(b, a, a, a) == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("shape mismatch") {
        auto c = random_tensor<float>(rng, {1, 3, 4, 5});
        CHECK_THROWS_AS(l1_loss_value(a, c, a, a), InvalidShape);
    }
    SUBCASE("permutation invariance across the batch dimension") {
        auto p0 = random_tensor<float>(rng, {2, 3, 4, 4});
        auto t0 = random_tensor<float>(rng, {2, 3, 4, 4});
        Tensor<float> p1{{2, 3, 4, 4}};
        Tensor<float> t1{{2, 3, 4, 4}};
        const std::int64_t half = p0.numel() / 2;
        for (std::int64_t i = 0; i < half; ++i) {
            p1[i] = p0[half + i];
            p1[half + i] = p0[i];
            t1[i] = t0[half + i];
            t1[half + i] = t0[i];
        }
        CHECK(l1_loss_value(p0, t0, p0, t0) ==
              doctest::Approx(l1_loss_value(p1, t1, p1, t1)).epsilon(1e-12));
    }
}

TEST_CASE("train_step") {
    auto cfg = tiny_cfg();
    TrainConfig tc;
    tc.iterations = 1;

    SUBCASE("frozen leaves parameters bitwise unchanged") {
        auto model = inject_adapters<float>(cfg, tiny_plan(), 2);
        auto trainable = apply_tuning_mode(model, TuningMode::frozen);
        CHECK(trainable.empty());
        auto before = snapshot_values(model);
        AdamW<float> opt(tc);
        train_step(model, tiny_batch(3), opt, trainable, tc.lr, tc, 0);
        for (const auto& [name, e] : model.params().entries())
            CHECK(max_abs_diff(before.at(name), e.var->value) == 0.0);
    }

    SUBCASE("a step on trainable adapters changes at least one of them") {
        auto model = inject_adapters<float>(cfg, tiny_plan(), 4);
        auto trainable = apply_tuning_mode(model, TuningMode::both);
        auto before = snapshot_values(model);
        AdamW<float> opt(tc);
        train_step(model, tiny_batch(5), opt, trainable, tc.lr, tc, 0);
        double delta = 0;
        for (const std::string& n : trainable)
            delta = std::max(delta, max_abs_diff(before.at(n), model.params().at(n).var->value));
        CHECK(delta > 0.0);
    }

    SUBCASE("update locality: frozen names never move in adapter modes") {
        for (TuningMode mode :
             {TuningMode::spatial_only, TuningMode::stereo_only, TuningMode::both}) {
            auto model = inject_adapters<float>(cfg, tiny_plan(), 6);
            auto trainable = apply_tuning_mode(model, mode);
            std::set<std::string> tset(trainable.begin(), trainable.end());
            auto before = snapshot_values(model);
            AdamW<float> opt(tc);
            for (int i = 0; i < 5; ++i)
                train_step(model, tiny_batch(7 + i), opt, trainable, tc.lr, tc, i);
            for (const auto& [name, e] : model.params().entries())
                if (!tset.count(name))
                    CHECK(max_abs_diff(before.at(name), e.var->value) == 0.0);
        }
    }

    SUBCASE("loss decreases when overfitting one batch") {
        auto model = inject_adapters<float>(cfg, tiny_plan(), 8);
        auto trainable = apply_tuning_mode(model, TuningMode::both);
        TrainConfig tcc;
        tcc.lr = 2e-3;
        tcc.schedule = TrainConfig::Sched::constant;
        AdamW<float> opt(tcc);
        Batch b = tiny_batch(9);
        double first = 0, last = 0;
        for (int i = 0; i < 200; ++i) {
            const double l = train_step(model, b, opt, trainable, tcc.lr, tcc, i);
            if (i == 0) first = l;
            last = l;
        }
        CHECK(last < first * 0.9);
    }
}

TEST_CASE("fit") {
    auto cfg = tiny_cfg();
    SynthConfig sc;
    sc.count = 2;
    sc.height = 24;
    sc.width = 32;
    sc.seed = 10;
    auto hr_pairs = make_synthetic_pairs(sc);
    std::vector<StereoSample> samples;
    for (size_t i = 0; i < hr_pairs.size(); ++i) {
        StereoSample s;
        s.id = std::to_string(i);
        s.hr.left = hr_pairs[i].left;
        s.hr.right = hr_pairs[i].right;
        s.lr.left = synthesize_lr(s.hr.left, 2);
        s.lr.right = synthesize_lr(s.hr.right, 2);
        samples.push_back(std::move(s));
    }

    SUBCASE("zero iterations keeps the initial state") {
        auto model = inject_adapters<float>(cfg, tiny_plan(), 11);
        auto before = snapshot_values(model);
        TrainConfig tc;
        tc.iterations = 0;
        BatchSampler sampler(samples, PatchSpec{8, 8}, 1, 2, {}, 0);
        fit(model, sampler, tc, TuningMode::both);
        for (const auto& [name, e] : model.params().entries())
            CHECK(max_abs_diff(before.at(name), e.var->value) == 0.0);
    }

    SUBCASE("same seed reproduces the loss curve") {
        TrainConfig tc;
        tc.iterations = 8;
        tc.seed = 12;
        auto run = [&] {
            auto model = inject_adapters<float>(cfg, tiny_plan(), tc.seed);
            BatchSampler sampler(samples, PatchSpec{8, 8}, 1, 2, {}, tc.seed);
            return fit(model, sampler, tc, TuningMode::both);
        };
        auto r1 = run();
        auto r2 = run();
        REQUIRE(r1.log.size() == r2.log.size());
        for (size_t i = 0; i < r1.log.size(); ++i) {
            CHECK(r1.log[i].loss == r2.log[i].loss);
            CHECK(r1.log[i].lr == r2.log[i].lr);
        }
    }

    SUBCASE("cosine schedule endpoints") {
        TrainConfig tc;
        tc.iterations = 1000;
        CHECK(lr_at(tc, 0) == doctest::Approx(tc.lr).epsilon(1e-12));
        CHECK(lr_at(tc, tc.iterations - 1) <= 1e-6);
        tc.schedule = TrainConfig::Sched::constant;
        CHECK(lr_at(tc, 999) == tc.lr);
    }

    SUBCASE("divergence carries the iteration index") {
        auto model = inject_adapters<float>(cfg, tiny_plan(), 13);
        auto trainable = apply_tuning_mode(model, TuningMode::both);
        TrainConfig tc;
        tc.lr = 1e18;  // blows the adapters up immediately
        tc.schedule = TrainConfig::Sched::constant;
        AdamW<float> opt(tc);
        Batch b = tiny_batch(14);
        bool threw = false;
        for (int i = 0; i < 10 && !threw; ++i) {
            try {
                train_step(model, b, opt, trainable, tc.lr, tc, i);
            } catch (const DivergenceError& e) {
                threw = true;
                CHECK(e.iteration >= 0);
            }
        }
        CHECK(threw);
    }
}
