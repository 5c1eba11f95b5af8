#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace steadapt {

// Planar CHW float image in [0,1].
struct Image {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Image() = default;
    Image(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_) {}

    float& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    float at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }

    Tensor<float> tensor() const { return Tensor<float>({1, c, h, w}, v); }
    static Image from_tensor(const Tensor<float>& t);  // (1,C,H,W) or (C,H,W)
};

struct ViewPair {
    Image left, right;
};

Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

Image crop(const Image& img, int y0, int x0, int h, int w);
Image hflip(const Image& img);
Image vflip(const Image& img);
Image permute_channels(const Image& img, const std::vector<int>& order);
void clamp01(Image& img);

double mse(const Image& a, const Image& b);

}  // namespace steadapt
