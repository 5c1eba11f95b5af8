#include "eval/metrics.hpp"

#include <cmath>

#include "core/error.hpp"

namespace steadapt {

double psnr_from_mse(double mse) {
    if (mse <= 0) return kPsnrCap;
    const double v = 10.0 * std::log10(1.0 / mse);
    return v > kPsnrCap ? kPsnrCap : v;
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double psnr(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidShape("psnr: size mismatch");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return psnr_from_mse(s / static_cast<double>(a.size()));
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const double* gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWin);
        double s = 0;
        for (int i = 0; i < kWin; ++i) {
            const double x = i - (kWin - 1) / 2.0;
            v[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * kSigma * kSigma));
            s += v[static_cast<size_t>(i)];
        }
        for (double& x : v) x /= s;
        return v;
    }();
    return w.data();
}

// Separable valid-mode Gaussian filter of a (h,w) plane -> (h-10, w-10).
void gauss_valid(const std::vector<double>& in, int h, int w, std::vector<double>& out) {
    const double* g = gaussian_window();
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> mid(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int t = 0; t < kWin; ++t) acc += g[t] * in[static_cast<size_t>(y) * w + x + t];
            mid[static_cast<size_t>(y) * ow + x] = acc;
        }
    out.resize(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int t = 0; t < kWin; ++t) acc += g[t] * mid[static_cast<size_t>(y + t) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w) throw InvalidShape("ssim: image sizes differ");
    if (a.h < kWin || a.w < kWin)
        throw InvalidShape("ssim needs at least " + std::to_string(kWin) + "x" +
                           std::to_string(kWin) + " input");
    const int h = a.h, w = a.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
    std::vector<double> mu1, mu2, m11, m22, m12;
    double total = 0;
    for (int c = 0; c < a.c; ++c) {
        for (size_t i = 0; i < plane; ++i) {
            const double va = a.v[static_cast<size_t>(c) * plane + i];
            const double vb = b.v[static_cast<size_t>(c) * plane + i];
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        gauss_valid(pa, h, w, mu1);
        gauss_valid(pb, h, w, mu2);
        gauss_valid(paa, h, w, m11);
        gauss_valid(pbb, h, w, m22);
        gauss_valid(pab, h, w, m12);
        double acc = 0;
        for (size_t i = 0; i < mu1.size(); ++i) {
            const double u1 = mu1[i], u2 = mu2[i];
            const double s11 = m11[i] - u1 * u1;
            const double s22 = m22[i] - u2 * u2;
            const double s12 = m12[i] - u1 * u2;
            acc += ((2 * u1 * u2 + kC1) * (2 * s12 + kC2)) /
                   ((u1 * u1 + u2 * u2 + kC1) * (s11 + s22 + kC2));
        }
        total += acc / static_cast<double>(mu1.size());
    }
    return total / a.c;
}

}  // namespace steadapt
