#include "data/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "core/error.hpp"

namespace fs = std::filesystem;

namespace steadapt {

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png";
}

}  // namespace

std::vector<PairPaths> scan_pairs(const std::string& root, int scale,
                                  std::vector<std::string>* warnings) {
    if (!fs::is_directory(root)) throw EmptyDataset("dataset root is not a directory: " + root);

    std::map<std::string, PairPaths> pairs;
    std::map<std::string, std::string> left_only, right_only;
    bool saw_anything = false;

    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) {
            // Flickr1024-track layout: one directory per pair, hr0/hr1 inside.
            const fs::path d = entry.path();
            if (fs::exists(d / "hr0.png") && fs::exists(d / "hr1.png")) {
                saw_anything = true;
                PairPaths p;
                p.id = d.filename().string();
                p.left_hr = (d / "hr0.png").string();
                p.right_hr = (d / "hr1.png").string();
                pairs.emplace(p.id, std::move(p));
            }
            continue;
        }
        if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
        saw_anything = true;
        const std::string stem = entry.path().stem().string();
        if (stem.size() > 2 && stem.compare(stem.size() - 2, 2, "_L") == 0)
            left_only.emplace(stem.substr(0, stem.size() - 2), entry.path().string());
        else if (stem.size() > 2 && stem.compare(stem.size() - 2, 2, "_R") == 0)
            right_only.emplace(stem.substr(0, stem.size() - 2), entry.path().string());
        else if (warnings)
            warnings->push_back("unrecognized image name: " + entry.path().string());
    }

    for (const auto& [id, lp] : left_only) {
        auto it = right_only.find(id);
        if (it == right_only.end()) {
            if (warnings) warnings->push_back("left view without right: " + lp);
            continue;
        }
        PairPaths p;
        p.id = id;
        p.left_hr = lp;
        p.right_hr = it->second;
        pairs.emplace(id, std::move(p));
    }
    for (const auto& [id, rp] : right_only)
        if (!left_only.count(id) && warnings)
            warnings->push_back("right view without left: " + rp);

    if (!saw_anything) throw EmptyDataset("no images found under " + root);

    // Benchmark-provided LR inputs, when present, live beside the HR files.
    if (scale > 0) {
        const fs::path lr_dir = fs::path(root) / ("lr_x" + std::to_string(scale));
        if (fs::is_directory(lr_dir))
            for (auto& [id, p] : pairs) {
                const fs::path l = lr_dir / (id + "_L.png");
                const fs::path r = lr_dir / (id + "_R.png");
                if (fs::exists(l) && fs::exists(r)) {
                    p.left_lr = l.string();
                    p.right_lr = r.string();
                }
            }
    }

    std::vector<PairPaths> out;
    out.reserve(pairs.size());
    for (auto& [id, p] : pairs) out.push_back(std::move(p));
    return out;
}

StereoSample load_sample(const PairPaths& p, int scale) {
    StereoSample s;
    s.id = p.id;
    s.hr.left = crop_to_multiple(read_png(p.left_hr), scale);
    s.hr.right = crop_to_multiple(read_png(p.right_hr), scale);
    if (s.hr.left.h != s.hr.right.h || s.hr.left.w != s.hr.right.w)
        throw InvalidShape("views of pair '" + p.id + "' differ in size");
    if (!p.left_lr.empty()) {
        s.lr.left = read_png(p.left_lr);
        s.lr.right = read_png(p.right_lr);
        if (s.lr.left.h != s.hr.left.h / scale || s.lr.left.w != s.hr.left.w / scale ||
            s.lr.right.h != s.lr.left.h || s.lr.right.w != s.lr.left.w)
            throw InvalidShape("provided LR for pair '" + p.id + "' is not HR/" +
                               std::to_string(scale));
    } else {
        s.lr.left = synthesize_lr(s.hr.left, scale);
        s.lr.right = synthesize_lr(s.hr.right, scale);
    }
    return s;
}

std::vector<StereoSample> load_dataset(const std::string& root, int scale,
                                       std::vector<std::string>* warnings) {
    std::vector<StereoSample> out;
    for (const auto& p : scan_pairs(root, scale, warnings)) out.push_back(load_sample(p, scale));
    return out;
}

namespace {

void copy_into(Tensor<float>& dst, int slot, const Image& img) {
    float* d = dst.data() + static_cast<std::int64_t>(slot) * img.numel();
    std::copy(img.v.begin(), img.v.end(), d);
}

}  // namespace

Batch sample_training_batch(const std::vector<StereoSample>& pairs, const PatchSpec& spec,
                            int batch, int scale, const AugmentConfig& aug, Rng& rng) {
    if (pairs.empty()) throw EmptyDataset("no pairs to sample from");
    const int ph = spec.height(scale), pw = spec.width(scale);
    Batch b{Tensor<float>({batch, 3, ph, pw}), Tensor<float>({batch, 3, ph, pw}),
            Tensor<float>({batch, 3, ph * scale, pw * scale}),
            Tensor<float>({batch, 3, ph * scale, pw * scale})};
    for (int i = 0; i < batch; ++i) {
        const StereoSample& s = pairs[rng.index(pairs.size())];
        if (s.lr.left.h < ph || s.lr.left.w < pw)
            throw PatchTooLarge("pair '" + s.id + "' LR " + std::to_string(s.lr.left.h) + "x" +
                                std::to_string(s.lr.left.w) + " smaller than patch " +
                                std::to_string(ph) + "x" + std::to_string(pw));
        const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(s.lr.left.h - ph + 1)));
        const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(s.lr.left.w - pw + 1)));
        Image ll = crop(s.lr.left, y0, x0, ph, pw);
        Image lr = crop(s.lr.right, y0, x0, ph, pw);
        Image hl = crop(s.hr.left, y0 * scale, x0 * scale, ph * scale, pw * scale);
        Image hr = crop(s.hr.right, y0 * scale, x0 * scale, ph * scale, pw * scale);
        if (aug.hflip && rng.coin()) {
            // Mirroring reverses the left/right geometry, so views swap.
            Image nll = hflip(lr), nlr = hflip(ll);
            Image nhl = hflip(hr), nhr = hflip(hl);
            ll = std::move(nll);
            lr = std::move(nlr);
            hl = std::move(nhl);
            hr = std::move(nhr);
        }
        if (aug.vflip && rng.coin()) {
            ll = vflip(ll);
            lr = vflip(lr);
            hl = vflip(hl);
            hr = vflip(hr);
        }
        if (aug.rgb_perm) {
            static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                            {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
            const int* p = perms[rng.index(6)];
            const std::vector<int> order{p[0], p[1], p[2]};
            ll = permute_channels(ll, order);
            lr = permute_channels(lr, order);
            hl = permute_channels(hl, order);
            hr = permute_channels(hr, order);
        }
        copy_into(b.lr_left, i, ll);
        copy_into(b.lr_right, i, lr);
        copy_into(b.hr_left, i, hl);
        copy_into(b.hr_right, i, hr);
    }
    return b;
}

std::vector<ViewPair> make_synthetic_pairs(const SynthConfig& cfg,
                                           std::vector<int>* disparities) {
    if (cfg.count <= 0 || cfg.height <= 0 || cfg.width <= 0)
        throw InvalidConfig("synthetic dataset dims must be positive");
    if (cfg.min_disparity < 0 || cfg.max_disparity < cfg.min_disparity)
        throw InvalidConfig("disparity range invalid");
    std::vector<ViewPair> out;
    out.reserve(static_cast<size_t>(cfg.count));
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        const int d = cfg.min_disparity +
                      static_cast<int>(rng.index(
                          static_cast<std::uint64_t>(cfg.max_disparity - cfg.min_disparity + 1)));
        if (disparities) disparities->push_back(d);
        const int cw = cfg.width + cfg.max_disparity;
        Image canvas(3, cfg.height, cw);

        // gentle per-channel gradient base
        double gx[3], gy[3], g0[3];
        for (int c = 0; c < 3; ++c) {
            g0[c] = rng.uniform(0.3, 0.7);
            gx[c] = rng.uniform(-0.15, 0.15);
            gy[c] = rng.uniform(-0.15, 0.15);
        }
        // shared luminance gratings, frequencies up to near Nyquist
        constexpr int kWaves = 10;
        double fx[kWaves], fy[kWaves], phase[kWaves], amp[kWaves];
        for (int k = 0; k < kWaves; ++k) {
            fx[k] = rng.uniform(-0.45, 0.45);
            fy[k] = rng.uniform(-0.45, 0.45);
            phase[k] = rng.uniform(0.0, 6.283185307179586);
            amp[k] = rng.uniform(0.02, 0.12);
        }
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cw; ++x) {
                double t = 0;
                for (int k = 0; k < kWaves; ++k)
                    t += amp[k] *
                         std::sin(6.283185307179586 * (fx[k] * x + fy[k] * y) + phase[k]);
                for (int c = 0; c < 3; ++c) {
                    const double base = g0[c] + gx[c] * x / cw + gy[c] * y / cfg.height;
                    canvas.at(c, y, x) = static_cast<float>(std::clamp(base + t, 0.0, 1.0));
                }
            }
        // a few soft rectangles for larger structure
        for (int rct = 0; rct < 5; ++rct) {
            const int rh = 4 + static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.height / 2)));
            const int rw = 4 + static_cast<int>(rng.index(static_cast<std::uint64_t>(cw / 2)));
            const int ry = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.height - rh + 1)));
            const int rx = static_cast<int>(rng.index(static_cast<std::uint64_t>(cw - rw + 1)));
            double dv[3];
            for (int c = 0; c < 3; ++c) dv[c] = rng.uniform(-0.25, 0.25);
            for (int y = ry; y < ry + rh; ++y)
                for (int x = rx; x < rx + rw; ++x)
                    for (int c = 0; c < 3; ++c)
                        canvas.at(c, y, x) = static_cast<float>(
                            std::clamp(static_cast<double>(canvas.at(c, y, x)) + dv[c], 0.0, 1.0));
        }

        ViewPair pair;
        pair.left = crop(canvas, 0, 0, cfg.height, cfg.width);
        pair.right = crop(canvas, 0, d, cfg.height, cfg.width);
        out.push_back(std::move(pair));
    }
    return out;
}

void write_synthetic_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto pairs = make_synthetic_pairs(cfg);
    for (size_t i = 0; i < pairs.size(); ++i) {
        char stem[16];
        std::snprintf(stem, sizeof stem, "%04zu", i + 1);
        write_png(pairs[i].left, (fs::path(out_dir) / (std::string(stem) + "_L.png")).string());
        write_png(pairs[i].right, (fs::path(out_dir) / (std::string(stem) + "_R.png")).string());
    }
}

}  // namespace steadapt
