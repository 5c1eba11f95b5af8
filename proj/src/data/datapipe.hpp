#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "data/image.hpp"
#include "data/resize.hpp"

namespace steadapt {

struct PairPaths {
    std::string id;
    std::string left_hr, right_hr;
    std::string left_lr, right_lr;  // empty when no lr_x{scale} sibling exists
};

// Matches <stem>_L.<ext>/<stem>_R.<ext> in root, plus per-pair subdirectories
// holding hr0.png/hr1.png. Sorted by id; unmatched singles land in warnings.
std::vector<PairPaths> scan_pairs(const std::string& root, int scale = 0,
                                  std::vector<std::string>* warnings = nullptr);

struct StereoSample {
    ViewPair hr, lr;
    std::string id;
};

// Decodes, crops HR to a multiple of scale, and attaches the LR pair (from
// lr_x{scale} files when present, bicubic-synthesized otherwise).
StereoSample load_sample(const PairPaths& p, int scale);

std::vector<StereoSample> load_dataset(const std::string& root, int scale,
                                       std::vector<std::string>* warnings = nullptr);

// LR-space patch size. Zero fields derive from the 128x320 HR patch.
struct PatchSpec {
    int lr_h = 0;
    int lr_w = 0;

    int height(int scale) const { return lr_h > 0 ? lr_h : 128 / scale; }
    int width(int scale) const { return lr_w > 0 ? lr_w : 320 / scale; }
};

struct AugmentConfig {
    bool hflip = true;    // horizontal flip swaps the two views
    bool vflip = true;
    bool rgb_perm = true; // same channel order for both views
};

struct Batch {
    Tensor<float> lr_left, lr_right, hr_left, hr_right;  // (B,3,*,*)
};

// Aligned random crops: one window per sample, reused for both views, scaled
// by `scale` for HR. Never resamples HR content.
Batch sample_training_batch(const std::vector<StereoSample>& pairs, const PatchSpec& spec,
                            int batch, int scale, const AugmentConfig& aug, Rng& rng);

// Deterministic batch stream: batch i is a pure function of (seed, i).
class BatchSampler {
public:
    BatchSampler(std::vector<StereoSample> samples, PatchSpec spec, int batch, int scale,
                 AugmentConfig aug, std::uint64_t seed)
        : samples_(std::move(samples)), spec_(spec), batch_(batch), scale_(scale), aug_(aug),
          seed_(seed) {}

    Batch next() {
        Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(counter_++)));
        return sample_training_batch(samples_, spec_, batch_, scale_, aug_, rng);
    }

    const std::vector<StereoSample>& samples() const { return samples_; }

private:
    std::vector<StereoSample> samples_;
    PatchSpec spec_;
    int batch_;
    int scale_;
    AugmentConfig aug_;
    std::uint64_t seed_;
    std::int64_t counter_ = 0;
};

// Textured stereo pairs with a constant integer disparity per pair; detail
// lost by downscaling one view stays recoverable from the other along the
// same row.
struct SynthConfig {
    int count = 8;
    int height = 96;
    int width = 128;
    int min_disparity = 1;
    int max_disparity = 8;
    std::uint64_t seed = 0;
};

std::vector<ViewPair> make_synthetic_pairs(const SynthConfig& cfg,
                                           std::vector<int>* disparities = nullptr);
void write_synthetic_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace steadapt
