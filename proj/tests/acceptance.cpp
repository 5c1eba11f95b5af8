// Acceptance suite: one test case per criterion, each printing a single
// [PASS]/[FAIL] line. Run the whole binary or filter with
//   acceptance --test-case='criterion-06*'

#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli/commands.hpp"
#include "cli/configfile.hpp"
#include "train/trainer.hpp"
#include "testutil.hpp"

using namespace steadapt;
using testutil::random_tensor;
namespace fs = std::filesystem;

namespace {

void report(int crit, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", crit, name.c_str(),
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, name << " " << detail);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<StereoSample> samples_from_pairs(const std::vector<ViewPair>& pairs, int scale,
                                             const std::string& prefix) {
    std::vector<StereoSample> out;
    for (size_t i = 0; i < pairs.size(); ++i) {
        StereoSample s;
        s.id = prefix + std::to_string(i);
        s.hr.left = crop_to_multiple(pairs[i].left, scale);
        s.hr.right = crop_to_multiple(pairs[i].right, scale);
        s.lr.left = synthesize_lr(s.hr.left, scale);
        s.lr.right = synthesize_lr(s.hr.right, scale);
        out.push_back(std::move(s));
    }
    return out;
}

StereoForward forward_of(const StereoModel<float>& model) {
    return [&model](const ViewPair& lr) {
        auto [l, r] = model.infer_pair(lr.left.tensor(), lr.right.tensor());
        return ViewPair{Image::from_tensor(l), Image::from_tensor(r)};
    };
}

BackboneConfig toy32() {
    BackboneConfig cfg;
    cfg.embed_dim = 32;
    cfg.num_groups = 2;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 4;
    cfg.window_size = 4;
    cfg.scale = 2;
    return cfg;
}

}  // namespace

TEST_CASE("criterion-01 parameter budgets at reference scale") {
    const auto t0 = std::chrono::steady_clock::now();
    BackboneConfig cfg;
    cfg.embed_dim = 180;
    cfg.num_groups = 12;
    cfg.blocks_per_group = 6;
    cfg.num_heads = 6;
    cfg.window_size = 16;
    cfg.scale = 4;
    InjectionPlan plan;
    plan.spatial = true;
    plan.stereo_sites = InjectionPlan::every_second_group(12);  // 6 mixers
    plan.bottleneck = 45;
    REQUIRE(plan.stereo_sites.size() == 6);

    auto model = inject_adapters<float>(cfg, plan, 0);
    apply_tuning_mode(model, TuningMode::spatial_only);
    const auto spatial = count_params(model, true);
    apply_tuning_mode(model, TuningMode::stereo_only);
    const auto stereo = count_params(model, true);
    apply_tuning_mode(model, TuningMode::both);
    const auto both = count_params(model, true);
    const double secs = elapsed_s(t0);

    const auto within = [](std::int64_t got, double want_m) {
        return std::abs(static_cast<double>(got) / 1e6 - want_m) / want_m <= 0.02;
    };
    // derived closed forms: 72*(2*180*45+45+180) and 6*(4*180^2+2*2*180+2)
    const bool exact = spatial == 1182600 && stereo == 781932 && both == 1964532;
    const bool budget = within(spatial, 1.18) && within(stereo, 0.78) && within(both, 1.97);
    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "spatial=%lld stereo=%lld both=%lld (%.2fM/%.2fM/%.2fM), %.1fs",
                  static_cast<long long>(spatial), static_cast<long long>(stereo),
                  static_cast<long long>(both), spatial / 1e6, stereo / 1e6, both / 1e6, secs);
    report(1, "parameter budgets", exact && budget && secs < 10.0, detail);
}

TEST_CASE("criterion-02 identity at init") {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        BackboneConfig cfg;
        int inputs;
    };
    std::vector<Case> cases;
    {
        BackboneConfig a = toy32();
        cases.push_back({a, 4});
        BackboneConfig b;
        b.embed_dim = 16;
        b.num_groups = 3;
        b.blocks_per_group = 1;
        b.num_heads = 2;
        b.window_size = 4;
        b.scale = 4;
        cases.push_back({b, 3});
        BackboneConfig c;
        c.embed_dim = 24;
        c.num_groups = 1;
        c.blocks_per_group = 3;
        c.num_heads = 3;
        c.window_size = 8;
        c.scale = 2;
        c.cab_squeeze = 4;
        cases.push_back({c, 3});
    }
    double worst = 0;
    Rng rng(2024);
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& cfg = cases[ci].cfg;
        InjectionPlan plan;
        plan.spatial = true;
        for (int g = 0; g < cfg.num_groups; ++g) plan.stereo_sites.push_back(g);
        StereoModel<float> injected(cfg, plan, 77 + ci);
        StereoModel<float> plain(cfg, {}, 77 + ci);
        for (int t = 0; t < cases[ci].inputs; ++t) {
            const int h = cfg.window_size * (1 + static_cast<int>(rng.index(2)));
            const int w = cfg.window_size * (1 + static_cast<int>(rng.index(3)));
            auto l = random_tensor<float>(rng, {1, 3, h, w}, 0.0, 1.0);
            auto r = random_tensor<float>(rng, {1, 3, h, w}, 0.0, 1.0);
            auto [sl, sr] = injected.infer_pair(l, r);
            worst = std::max(worst, max_abs_diff(sl, plain.infer_single(l)));
            worst = std::max(worst, max_abs_diff(sr, plain.infer_single(r)));
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof detail, "max |diff| = %.3g over 10 inputs, %.1fs", worst,
                  elapsed_s(t0));
    report(2, "identity at init", worst < 1e-5, detail);
}

TEST_CASE("criterion-03 gradient isolation over 100 steps") {
    const auto t0 = std::chrono::steady_clock::now();
    BackboneConfig cfg;
    cfg.embed_dim = 16;
    cfg.num_groups = 1;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 2;
    cfg.window_size = 4;
    cfg.scale = 2;
    InjectionPlan plan;
    plan.spatial = true;
    plan.stereo_sites = {0};

    bool ok = true;
    std::string bad;
    for (TuningMode mode : {TuningMode::spatial_only, TuningMode::stereo_only, TuningMode::both}) {
        StereoModel<float> model(cfg, plan, 5);
        auto trainable = apply_tuning_mode(model, mode);
        std::set<std::string> tset(trainable.begin(), trainable.end());
        std::map<std::string, Tensor<float>> before;
        for (const auto& [name, e] : model.params().entries())
            if (!tset.count(name)) before.emplace(name, e.var->value.clone());

        TrainConfig tc;
        tc.lr = 1e-3;
        tc.schedule = TrainConfig::Sched::constant;
        AdamW<float> opt(tc);
        Rng rng(6);
        Batch batch{random_tensor<float>(rng, {1, 3, 8, 8}, 0.0, 1.0),
                    random_tensor<float>(rng, {1, 3, 8, 8}, 0.0, 1.0),
                    random_tensor<float>(rng, {1, 3, 16, 16}, 0.0, 1.0),
                    random_tensor<float>(rng, {1, 3, 16, 16}, 0.0, 1.0)};
        for (int i = 0; i < 100; ++i) train_step(model, batch, opt, trainable, tc.lr, tc, i);

        for (const auto& [name, t] : before) {
            const auto& now = model.params().at(name).var->value;
            for (std::int64_t i = 0; i < now.numel(); ++i)
                if (std::memcmp(&now[i], &t[i], sizeof(float)) != 0) {
                    ok = false;
                    bad = std::string(tuning_mode_name(mode)) + ":" + name;
                    break;
                }
            if (!ok) break;
        }
        if (!ok) break;
    }
    char detail[192];
    std::snprintf(detail, sizeof detail, "%s%.1fs",
                  ok ? "" : ("first violated tensor " + bad + ", ").c_str(), elapsed_s(t0));
    report(3, "gradient isolation (spatial_only/stereo_only/both)", ok, detail);
}

TEST_CASE("criterion-04 attention oracle") {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(7);
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int rq = 1 + static_cast<int>(rng.index(16));
        const int rk = 1 + static_cast<int>(rng.index(16));
        const int c = 1 + static_cast<int>(rng.index(8));
        const double taus[3] = {0.25, 1.0, 4.0};
        const double tau = taus[rng.index(3)];
        auto q = random_tensor<double>(rng, {rq, c});
        auto k = random_tensor<double>(rng, {rk, c});
        auto v = random_tensor<double>(rng, {rk, c});
        auto got = temperature_attention(q, k, v, tau);
        auto want = testutil::naive_attention(
            std::vector<double>(q.data(), q.data() + q.numel()),
            std::vector<double>(k.data(), k.data() + k.numel()),
            std::vector<double>(v.data(), v.data() + v.numel()), rq, rk, c, c,
            tau / std::sqrt(static_cast<double>(c)));
        for (std::int64_t i = 0; i < got.numel(); ++i)
            worst = std::max(worst, std::abs(got[i] - want[static_cast<size_t>(i)]));
    }

    // width-2 stereo fixtures against the composed equation
    double worst_stereo = 0;
    for (int trial = 0; trial < 5; ++trial) {
        ParamStore<double> ps(100 + trial);
        StereoAdapter<double> sa;
        sa.init(ps, "adapter.stereo.g0", 2, 1.0 + 0.5 * trial, true);
        for (auto& [name, e] : ps.entries())
            for (std::int64_t i = 0; i < e.var->value.numel(); ++i)
                e.var->value[i] = rng.uniform(-0.8, 0.8);
        auto xl = random_tensor<double>(rng, {1, 2, 1, 2});
        auto xr = random_tensor<double>(rng, {1, 2, 1, 2});
        auto [ol, orr] = stereo_adapter_forward(xl, xr, sa);

        auto row_of = [](const Tensor<double>& f) {
            return std::vector<double>{f[0], f[2], f[1], f[3]};
        };
        auto ln = [&](std::vector<double> rows, const ad::Var<double>& sc,
                      const ad::Var<double>& sh) {
            for (int p = 0; p < 2; ++p) {
                const double mu = (rows[p * 2] + rows[p * 2 + 1]) / 2;
                double var = 0;
                for (int t = 0; t < 2; ++t) var += (rows[p * 2 + t] - mu) * (rows[p * 2 + t] - mu);
                var /= 2;
                for (int t = 0; t < 2; ++t)
                    rows[p * 2 + t] =
                        (rows[p * 2 + t] - mu) / std::sqrt(var + 1e-5) * sc->value[t] +
                        sh->value[t];
            }
            return rows;
        };
        auto proj = [](const std::vector<double>& rows, const ad::Var<double>& w) {
            std::vector<double> out(4, 0.0);
            for (int p = 0; p < 2; ++p)
                for (int o = 0; o < 2; ++o)
                    for (int i = 0; i < 2; ++i)
                        out[p * 2 + o] += rows[p * 2 + i] * w->value[o * 2 + i];
            return out;
        };
        const auto ql = proj(ln(row_of(xl), sa.norm_l.scale, sa.norm_l.shift), sa.w1_l.w);
        const auto qr = proj(ln(row_of(xr), sa.norm_r.scale, sa.norm_r.shift), sa.w1_r.w);
        const auto vl = proj(row_of(xl), sa.w2_l.w);
        const auto vr = proj(row_of(xr), sa.w2_r.w);
        const double scale = sa.tau / std::sqrt(2.0);
        const auto f_rl = testutil::naive_attention(ql, qr, vr, 2, 2, 2, 2, scale);
        const auto f_lr = testutil::naive_attention(qr, ql, vl, 2, 2, 2, 2, scale);
        const double gl = sa.gamma_l->value[0], gr = sa.gamma_r->value[0];
        const double el[4] = {xl[0] + gl * f_rl[0], xl[1] + gl * f_rl[2],
                              xl[2] + gl * f_rl[1], xl[3] + gl * f_rl[3]};
        const double er[4] = {xr[0] + gr * f_lr[0], xr[1] + gr * f_lr[2],
                              xr[2] + gr * f_lr[1], xr[3] + gr * f_lr[3]};
        for (int i = 0; i < 4; ++i) {
            worst_stereo = std::max(worst_stereo, std::abs(ol[i] - el[i]));
            worst_stereo = std::max(worst_stereo, std::abs(orr[i] - er[i]));
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "TA max |diff| = %.3g (50 instances), stereo fixtures %.3g, %.1fs", worst,
                  worst_stereo, elapsed_s(t0));
    report(4, "attention oracle", worst < 1e-6 && worst_stereo < 1e-6, detail);
}

TEST_CASE("criterion-05 gradient correctness (float64 finite differences)") {
    const auto t0 = std::chrono::steady_clock::now();
    BackboneConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_groups = 1;
    cfg.blocks_per_group = 2;
    cfg.num_heads = 2;
    cfg.window_size = 4;
    cfg.scale = 2;
    InjectionPlan plan;
    plan.spatial = true;
    plan.stereo_sites = {0};
    StereoModel<double> model(cfg, plan, 11);

    // push adapters off their identity init so every field carries gradient
    Rng bump(12);
    for (auto& [name, e] : model.params().entries())
        if (name.rfind("adapter.", 0) == 0)
            for (std::int64_t i = 0; i < e.var->value.numel(); ++i)
                e.var->value[i] += bump.uniform(-0.2, 0.2);

    Rng rng(13);
    auto lt = random_tensor<double>(rng, {1, 3, 4, 8}, 0.0, 1.0);
    auto rt = random_tensor<double>(rng, {1, 3, 4, 8}, 0.0, 1.0);
    auto tl = random_tensor<double>(rng, {1, 3, 8, 16}, 0.0, 1.0);
    auto tr = random_tensor<double>(rng, {1, 3, 8, 16}, 0.0, 1.0);
    auto loss = [&] {
        auto [sl, sr] = model.forward_pair(ad::constant(lt), ad::constant(rt));
        return l1_loss_pair(sl, ad::constant(tl), sr, ad::constant(tr));
    };

    std::vector<std::pair<std::string, ad::Var<double>>> params;
    for (auto& [name, e] : model.params().entries())
        if (name.rfind("adapter.", 0) == 0) params.emplace_back(name, e.var);
    const size_t adapter_classes = params.size();
    Rng pick(14);
    std::vector<std::string> backbone_names;
    for (const auto& [name, e] : model.params().entries())
        if (name.rfind("backbone.", 0) == 0) backbone_names.push_back(name);
    std::set<std::string> chosen;
    while (chosen.size() < 20) {
        const std::string& n = backbone_names[pick.index(backbone_names.size())];
        if (chosen.insert(n).second) params.emplace_back(n, model.params().at(n).var);
    }

    auto res = testutil::grad_check(loss, params, 1e-3, 2, 15);
    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "max rel err %.3g over %zu adapter tensors + 20 backbone tensors (%s), %.1fs",
                  res.max_rel_err, adapter_classes, res.worst.c_str(), elapsed_s(t0));
    report(5, "gradient correctness", res.max_rel_err < 1e-3, detail);
}

TEST_CASE("criterion-06 overfit smoke test") {
    const auto t0 = std::chrono::steady_clock::now();
    const BackboneConfig cfg = toy32();
    InjectionPlan plan;
    plan.spatial = true;
    plan.stereo_sites = {0, 1};
    plan.bottleneck = 16;

    // single synthetic pair: LR 64x96 at scale 2
    SynthConfig sc;
    sc.count = 1;
    sc.height = 128;
    sc.width = 192;
    sc.min_disparity = 2;
    sc.max_disparity = 2;
    sc.seed = 20;
    auto samples = samples_from_pairs(make_synthetic_pairs(sc), 2, "overfit");
    REQUIRE(samples[0].lr.left.h == 64);
    REQUIRE(samples[0].lr.left.w == 96);

    StereoModel<float> model(cfg, plan, 21);
    TrainConfig tc;
    tc.lr = 2e-3;
    tc.iterations = 1500;  // criterion allows up to 2000
    tc.batch = 1;
    tc.seed = 22;
    BatchSampler sampler(samples, PatchSpec{32, 48}, tc.batch, 2, AugmentConfig{false, false, false},
                         tc.seed);
    fit(model, sampler, tc, TuningMode::both);

    // train PSNR on the full pair
    EvalProtocol proto;
    const double train_psnr = evaluate_dataset(forward_of(model), samples, proto).psnr;
    char detail[128];
    std::snprintf(detail, sizeof detail, "train PSNR %.2f dB after %ld steps, %.0fs", train_psnr,
                  tc.iterations, elapsed_s(t0));
    report(6, "overfit smoke test (>= 35 dB)", train_psnr >= 35.0, detail);
}

TEST_CASE("criterion-07 transfer direction") {
    const auto t0 = std::chrono::steady_clock::now();
    const int scale = 2;
    BackboneConfig cfg = toy32();

    // training and held-out sets share the generator family; odd disparity
    // keeps half-pixel cross-view phase at x2
    SynthConfig train_sc;
    train_sc.count = 6;
    train_sc.height = 64;
    train_sc.width = 96;
    train_sc.min_disparity = 1;
    train_sc.max_disparity = 1;
    train_sc.seed = 30;
    SynthConfig held_sc = train_sc;
    held_sc.count = 4;
    held_sc.seed = 31;
    auto train_samples = samples_from_pairs(make_synthetic_pairs(train_sc), scale, "tr");
    auto held_samples = samples_from_pairs(make_synthetic_pairs(held_sc), scale, "ho");

    // 1) brief single-image pretraining of the bare backbone
    StereoModel<float> base(cfg, {}, 40);
    TrainConfig pre;
    pre.lr = 1e-3;
    pre.iterations = 600;
    pre.batch = 2;
    pre.seed = 41;
    BatchSampler pre_sampler(train_samples, PatchSpec{16, 24}, pre.batch, scale, {}, pre.seed);
    fit(base, pre_sampler, pre, TuningMode::full);
    const Checkpoint pretrained = snapshot(base);

    EvalProtocol proto;
    const double frozen_psnr = evaluate_dataset(forward_of(base), held_samples, proto).psnr;

    // 2) adapter fine-tuning on top of the frozen backbone
    auto tune = [&](TuningMode mode, const InjectionPlan& plan, std::uint64_t seed) {
        StereoModel<float> m(cfg, plan, seed);
        load_pretrained(m, pretrained, LoadPolicy::strict_backbone);
        TrainConfig ft;
        ft.lr = 5e-4;
        ft.iterations = 700;
        ft.batch = 2;
        ft.seed = seed;
        BatchSampler s(train_samples, PatchSpec{16, 24}, ft.batch, scale, {}, ft.seed);
        fit(m, s, ft, mode);
        return evaluate_dataset(forward_of(m), held_samples, proto).psnr;
    };

    InjectionPlan both_plan;
    both_plan.spatial = true;
    both_plan.stereo_sites = {0, 1};
    const double both_psnr = tune(TuningMode::both, both_plan, 42);

    InjectionPlan stereo_plan;
    stereo_plan.spatial = false;
    stereo_plan.stereo_sites = {0, 1};
    const double stereo_psnr = tune(TuningMode::stereo_only, stereo_plan, 43);

    char detail[192];
    std::snprintf(detail, sizeof detail,
                  "frozen %.2f dB, both %.2f dB (%+0.2f), stereo_only %.2f dB (%+0.2f), %.0fs",
                  frozen_psnr, both_psnr, both_psnr - frozen_psnr, stereo_psnr,
                  stereo_psnr - frozen_psnr, elapsed_s(t0));
    report(7, "transfer direction", both_psnr >= frozen_psnr + 0.1 && stereo_psnr > frozen_psnr,
           detail);
}

TEST_CASE("criterion-08 metrics oracle") {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream why;

    // PSNR closed forms, exact to 1e-9
    {
        std::vector<double> x(256, 0.2), y(256, 0.3);
        if (std::abs(psnr(x, y) - 20.0) > 1e-9) {
            ok = false;
            why << "psnr(0.01)!=20 ";
        }
        std::vector<double> a(64, 0.25), b(64, 0.5);
        if (std::abs(psnr(a, b) - 40.0 * std::log10(2.0)) > 1e-9) {
            ok = false;
            why << "psnr(2^-4) ";
        }
        Image img(3, 12, 12);
        for (float& v : img.v) v = 0.7f;
        if (psnr(img, img) != 100.0) {
            ok = false;
            why << "psnr cap ";
        }
        Image zero(3, 12, 12), one(3, 12, 12);
        for (float& v : one.v) v = 1.0f;
        if (psnr(zero, one) != 0.0) {
            ok = false;
            why << "psnr 0dB ";
        }
    }

    // SSIM against the independent reference on 3 stored fixtures
    double worst_ssim = 0;
    for (std::uint64_t seed : {50ULL, 51ULL, 52ULL}) {
        SynthConfig sc;
        sc.count = 1;
        sc.height = 24;
        sc.width = 32;
        sc.seed = seed;
        auto pair = make_synthetic_pairs(sc)[0];
        Image degraded = pair.left;
        Rng noise(seed + 7);
        for (float& v : degraded.v)
            v = static_cast<float>(
                std::clamp(static_cast<double>(v) + noise.uniform(-0.12, 0.12), 0.0, 1.0));
        worst_ssim = std::max(
            worst_ssim,
            std::abs(ssim(pair.left, degraded) - testutil::ssim_reference(pair.left, degraded)));
    }
    if (worst_ssim >= 1e-4) {
        ok = false;
        why << "ssim diff " << worst_ssim << " ";
    }
    char detail[160];
    std::snprintf(detail, sizeof detail, "%sssim max |diff| = %.3g, %.1fs", why.str().c_str(),
                  worst_ssim, elapsed_s(t0));
    report(8, "metrics oracle", ok, detail);
}

TEST_CASE("criterion-09 determinism of cmd_train") {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir dir("steadapt_acc9");
    SynthConfig sc;
    sc.count = 2;
    sc.height = 32;
    sc.width = 48;
    sc.seed = 60;
    write_synthetic_dataset(sc, dir.sub("data"));

    auto write_cfg = [&](const std::string& out) {
        std::ostringstream os;
        os << "[backbone]\nembed_dim = 16\nnum_groups = 1\nblocks_per_group = 2\nnum_heads = 2\n"
              "window_size = 4\nscale = 2\n"
           << "[plan]\nspatial = true\nstereo_sites = all\n"
           << "[train]\nlr = 1e-3\niterations = 60\nbatch = 1\nseed = 61\n"
           << "[data]\nroot = " << dir.sub("data") << "\npatch_lr_h = 8\npatch_lr_w = 12\n"
           << "[run]\nmode = both\nout_dir = " << out << "\n";
        const std::string p = dir.sub("cfg_" + fs::path(out).filename().string() + ".ini");
        std::ofstream f(p);
        f << os.str();
        return p;
    };

    REQUIRE(run_cli({"train", write_cfg(dir.sub("run1"))}) == 0);
    REQUIRE(run_cli({"train", write_cfg(dir.sub("run2"))}) == 0);

    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    const bool ckpt_same =
        slurp(dir.sub("run1") + "/model.ckpt") == slurp(dir.sub("run2") + "/model.ckpt");

    // loss log: iter,loss,lr columns must match bitwise; wall-clock may not
    auto loss_cols = [](const std::string& p) {
        std::ifstream f(p);
        std::string line, out;
        while (std::getline(f, line)) {
            const auto last = line.rfind(',');
            out += line.substr(0, last);
            out += '\n';
        }
        return out;
    };
    const bool log_same = loss_cols(dir.sub("run1") + "/train_log.csv") ==
                          loss_cols(dir.sub("run2") + "/train_log.csv");
    char detail[128];
    std::snprintf(detail, sizeof detail, "checkpoints %s, loss logs %s, %.0fs",
                  ckpt_same ? "identical" : "DIFFER", log_same ? "identical" : "DIFFER",
                  elapsed_s(t0));
    report(9, "bitwise determinism", ckpt_same && log_same, detail);
}

TEST_CASE("criterion-10 ablation harness") {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir dir("steadapt_acc10");
    SynthConfig sc;
    sc.count = 2;
    sc.height = 32;
    sc.width = 48;
    sc.seed = 70;
    write_synthetic_dataset(sc, dir.sub("data"));

    // one template; per-run overrides select the regime
    const std::string tmpl = dir.sub("template.ini");
    {
        std::ofstream f(tmpl);
        f << "[backbone]\nembed_dim = 16\nnum_groups = 2\nblocks_per_group = 1\nnum_heads = 2\n"
             "window_size = 4\nscale = 2\n"
          << "[plan]\nspatial = true\nstereo_sites = all\n"
          << "[train]\nlr = 1e-3\niterations = 12\nbatch = 1\nseed = 71\n"
          << "[data]\nroot = " << dir.sub("data") << "\npatch_lr_h = 8\npatch_lr_w = 12\n"
          << "[run]\nmode = both\nout_dir = " << dir.sub("runs") << "\n";
    }

    struct Run {
        std::string name;
        std::vector<std::string> overrides;
    };
    std::vector<Run> runs;
    for (const char* mode : {"scratch", "full", "spatial_only", "stereo_only", "both"})
        runs.push_back({std::string("mode_") + mode, {std::string("--run.mode=") + mode}});
    runs.push_back({"sites_0", {"--plan.stereo_sites=none"}});
    runs.push_back({"sites_1", {"--plan.stereo_sites=0"}});
    runs.push_back({"sites_2", {"--plan.stereo_sites=0,1"}});

    const std::string csv_path = dir.sub("ablation.csv");
    std::ofstream csv(csv_path);
    csv << "run,mode,stereo_sites,trainable_params,final_loss,psnr,ssim\n";
    bool all_ok = true;
    for (const Run& run : runs) {
        const std::string out = dir.sub("runs/" + run.name);
        std::vector<std::string> args{"train", tmpl, "--run.out_dir=" + out};
        for (const std::string& ov : run.overrides) args.push_back(ov);
        if (run_cli(args) != 0) {
            all_ok = false;
            break;
        }
        // pull the numbers back out of the run artifacts
        ConfigMap m = ConfigMap::from_file(out + "/config_resolved.ini");
        RunConfig rc = RunConfig::from_map(m);
        auto model = inject_adapters<float>(rc.backbone, rc.plan, rc.train.seed);
        Checkpoint ckpt = read_checkpoint(out + "/model.ckpt");
        load_pretrained(model, ckpt, LoadPolicy::strict_backbone);
        apply_tuning_mode(model, rc.mode);

        std::ifstream log(out + "/train_log.csv");
        std::string line, last;
        std::getline(log, line);  // header
        while (std::getline(log, line))
            if (!line.empty()) last = line;
        const auto c1 = last.find(','), c2 = last.find(',', c1 + 1);
        const double final_loss = std::stod(last.substr(c1 + 1, c2 - c1 - 1));

        std::ifstream rep(out + "/report.json");
        std::stringstream ss;
        ss << rep.rdbuf();
        const auto ppos = ss.str().find("\"psnr\"");
        const auto spos = ss.str().find("\"ssim\"");
        const double psnr_v = std::stod(ss.str().substr(ss.str().find(':', ppos) + 1));
        const double ssim_v = std::stod(ss.str().substr(ss.str().find(':', spos) + 1));

        std::string sites = "";
        for (size_t i = 0; i < rc.plan.stereo_sites.size(); ++i)
            sites += (i ? ";" : "") + std::to_string(rc.plan.stereo_sites[i]);
        csv << run.name << "," << tuning_mode_name(rc.mode) << "," << sites << ","
            << count_params(model, true) << "," << final_loss << "," << psnr_v << "," << ssim_v
            << "\n";
        all_ok = all_ok && std::isfinite(final_loss) && std::isfinite(psnr_v);
    }
    csv.close();

    // structural check: header + 8 rows
    std::ifstream check(csv_path);
    int rows = 0;
    std::string line;
    while (std::getline(check, line))
        if (!line.empty()) ++rows;
    char detail[128];
    std::snprintf(detail, sizeof detail, "%d/8 runs, comparison CSV rows %d, %.0fs",
                  all_ok ? 8 : 0, rows - 1, elapsed_s(t0));
    report(10, "ablation harness (5 modes + stereo-site sweep)", all_ok && rows == 9, detail);
}
