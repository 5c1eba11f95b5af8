#pragma once

#include "data/image.hpp"

namespace steadapt {

// Catmull-Rom-style cubic with a = -0.5.
double cubic_kernel(double x);

// Separable bicubic resampling on a center-aligned grid, clamp-to-edge
// boundaries. Downscaling stretches the kernel by the scale factor
// (anti-aliased); weights are normalized to sum to one. Math in double.
Image resize_bicubic(const Image& img, int out_h, int out_w);

// HR -> LR by an integer factor; dims must already be divisible.
Image synthesize_lr(const Image& hr, int scale);

// Crops bottom/right so both dims are divisible by `scale`.
Image crop_to_multiple(const Image& img, int scale);

}  // namespace steadapt
