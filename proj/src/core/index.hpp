#pragma once

#include <cstdint>
#include <memory>
#include <vector>

// Element-index maps (output position -> input position) for the gather op.
// Every layout change in the model -- token/feature-map transposes, window
// partition with cyclic shift, head split, reflect pad, crop, pixel shuffle,
// relative-position-bias lookup -- is one of these maps. Maps are cached per
// shape; the gather op and its scatter-add backward are implemented once.

namespace steadapt::idx {

using IndexVec = std::shared_ptr<const std::vector<std::int32_t>>;
using MaskVec = std::shared_ptr<const std::vector<std::int8_t>>;  // 1 = same region

// (B,C,H,W) -> (B,N,C), N = H*W row-major.
IndexVec bchw_to_bnc(int b, int c, int h, int w);
// (B,N,C) -> (B,C,H,W).
IndexVec bnc_to_bchw(int b, int c, int h, int w);

// From token grid flattened as (B*N, 3D) after the fused qkv projection to
// (B*nW*heads, ws*ws, headDim) for one of q/k/v (part 0/1/2), applying the
// cyclic shift before windowing.
IndexVec window_qkv(int b, int h, int w, int d, int heads, int ws, int shift, int part);
// Inverse: (B*nW*heads, ws*ws, headDim) flat -> (B,N,D).
IndexVec window_merge(int b, int h, int w, int d, int heads, int ws, int shift);

// Reflect pad on bottom/right only (pad < dim required).
IndexVec pad_reflect_br(int b, int c, int h, int w, int ph, int pw);
// Top-left crop from (hp,wp) to (h,w).
IndexVec crop_tl(int b, int c, int hp, int wp, int h, int w);

// (B, C*r*r, H, W) -> (B, C, H*r, W*r).
IndexVec pixel_shuffle(int b, int c_out, int r, int h, int w);

// (heads, R, R) lookup into the ((2*ws-1)^2, heads) bias table.
IndexVec rel_bias(int heads, int ws);

// Swin shifted-window attention mask over the rolled grid: (nW, R, R) bytes,
// 1 where query/key fall in the same contiguous region.
MaskVec shift_mask(int h, int w, int ws, int shift);

}  // namespace steadapt::idx
