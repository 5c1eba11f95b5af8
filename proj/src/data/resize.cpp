#include "data/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/error.hpp"

namespace steadapt {

double cubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace {

struct TapSet {
    std::vector<int> first;       // per output index
    std::vector<double> weights;  // taps per output index, row-major
    int taps = 0;
};

TapSet build_taps(int in, int out) {
    const double step = static_cast<double>(in) / out;
    const double support = std::max(1.0, step);  // kernel stretch for downscale
    const int taps = static_cast<int>(std::ceil(4.0 * support)) + 1;
    TapSet ts;
    ts.taps = taps;
    ts.first.resize(static_cast<size_t>(out));
    ts.weights.assign(static_cast<size_t>(out) * taps, 0.0);
    for (int o = 0; o < out; ++o) {
        const double center = (o + 0.5) * step - 0.5;
        const int first = static_cast<int>(std::floor(center - 2.0 * support)) + 1;
        ts.first[static_cast<size_t>(o)] = first;
        double sum = 0;
        double* wr = ts.weights.data() + static_cast<size_t>(o) * taps;
        for (int t = 0; t < taps; ++t) {
            const double w = cubic_kernel((first + t - center) / support);
            wr[t] = w;
            sum += w;
        }
        for (int t = 0; t < taps; ++t) wr[t] /= sum;
    }
    return ts;
}

}  // namespace

Image resize_bicubic(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw InvalidShape("resize target must be positive");
    const TapSet tx = build_taps(img.w, out_w);
    const TapSet ty = build_taps(img.h, out_h);

    // horizontal pass in double
    std::vector<double> mid(static_cast<size_t>(img.c) * img.h * out_w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y) {
            const float* row = img.v.data() + (static_cast<size_t>(c) * img.h + y) * img.w;
            double* orow = mid.data() + (static_cast<size_t>(c) * img.h + y) * out_w;
            for (int o = 0; o < out_w; ++o) {
                const int first = tx.first[static_cast<size_t>(o)];
                const double* wr = tx.weights.data() + static_cast<size_t>(o) * tx.taps;
                double acc = 0;
                for (int t = 0; t < tx.taps; ++t) {
                    const int sx = std::clamp(first + t, 0, img.w - 1);
                    acc += wr[t] * static_cast<double>(row[sx]);
                }
                orow[o] = acc;
            }
        }

    Image out(img.c, out_h, out_w);
    for (int c = 0; c < img.c; ++c)
        for (int o = 0; o < out_h; ++o) {
            const int first = ty.first[static_cast<size_t>(o)];
            const double* wr = ty.weights.data() + static_cast<size_t>(o) * ty.taps;
            for (int x = 0; x < out_w; ++x) {
                double acc = 0;
                for (int t = 0; t < ty.taps; ++t) {
                    const int sy = std::clamp(first + t, 0, img.h - 1);
                    acc += wr[t] * mid[(static_cast<size_t>(c) * img.h + sy) * out_w + x];
                }
                out.at(c, o, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
        }
    return out;
}

Image synthesize_lr(const Image& hr, int scale) {
    if (hr.h % scale != 0 || hr.w % scale != 0)
        throw InvalidShape("image " + std::to_string(hr.h) + "x" + std::to_string(hr.w) +
                           " not divisible by scale " + std::to_string(scale));
    return resize_bicubic(hr, hr.h / scale, hr.w / scale);
}

Image crop_to_multiple(const Image& img, int scale) {
    const int h = img.h / scale * scale;
    const int w = img.w / scale * scale;
    if (h == 0 || w == 0) throw InvalidShape("image smaller than scale factor");
    if (h == img.h && w == img.w) return img;
    return crop(img, 0, 0, h, w);
}

}  // namespace steadapt
