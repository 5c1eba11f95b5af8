#pragma once

#include <vector>

#include "data/image.hpp"

namespace steadapt {

inline constexpr double kPsnrCap = 100.0;

// 10*log10(1/MSE) on [0,1] data, capped at 100 dB for vanishing error.
double psnr_from_mse(double mse);
double psnr(const Image& a, const Image& b);
double psnr(const std::vector<double>& a, const std::vector<double>& b);

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03,
// dynamic range 1, valid-window maps, averaged over channels.
double ssim(const Image& a, const Image& b);

}  // namespace steadapt
