#pragma once

#include <Eigen/Core>

#include "mvfuse/common.hpp"
#include "mvfuse/mv_clip.hpp"

namespace mvfuse {

using Plane = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 2-channel real-valued frame in [-0.5, 0.5] after normalize_mv.
struct NormalizedMVFrame {
  Plane dx;
  Plane dy;
  int height() const { return int(dx.rows()); }
  int width() const { return int(dx.cols()); }
};

// Maps raw displacements to [-0.5, 0.5]:
//   y = clamp(rint(x * 127.5/20 + 128), 0, 255) / 255 - 0.5
// The rint matches the 8-bit intermediate representation; round-half-even
// makes -20 land exactly on -0.5.
NormalizedMVFrame normalize_mv(const MVFrame& frame);
float normalize_mv_value(float x);

// Horizontal flip specialized for motion vectors: mirror columns on both
// channels, negate dx, keep dy.
MVFrame hflip_mv(const MVFrame& frame);

// Fixed crop parameters so a whole clip can share one draw.
struct CropParams {
  int side = 0;  // square crop side in source pixels
  int top = 0;
  int left = 0;
};

// TSN-style multi-scale crop: side = round(min(H,W) * s), s uniform over
// {1.0, 0.875, 0.75, 0.66}; offset one of 4 corners + center.
CropParams draw_multiscale_crop(int height, int width, Rng& rng);
CropParams center_crop_params(int height, int width);

// Crop `params` then bilinear-resize to out_size x out_size, per channel.
MVFrame crop_resize(const MVFrame& frame, const CropParams& params, int out_size);

MVFrame multiscale_crop(const MVFrame& frame, int out_size, Rng& rng);
MVFrame center_crop_resize(const MVFrame& frame, int out_size);

}  // namespace mvfuse
