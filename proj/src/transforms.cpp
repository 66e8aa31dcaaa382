#include "mvfuse/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace mvfuse {

float normalize_mv_value(float x) {
  float v = std::nearbyint(x * (127.5f / 20.0f) + 128.0f);  // 8-bit grid, half-to-even
  v = std::clamp(v, 0.0f, 255.0f);
  return v / 255.0f - 0.5f;
}

NormalizedMVFrame normalize_mv(const MVFrame& frame) {
  NormalizedMVFrame out;
  out.dx.resize(frame.height, frame.width);
  out.dy.resize(frame.height, frame.width);
  const size_t n = size_t(frame.height) * frame.width;
  for (size_t i = 0; i < n; ++i) {
    out.dx.data()[i] = normalize_mv_value(float(frame.dx[i]));
    out.dy.data()[i] = normalize_mv_value(float(frame.dy[i]));
  }
  return out;
}

MVFrame hflip_mv(const MVFrame& frame) {
  MVFrame out(frame.height, frame.width);
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      const int mc = frame.width - 1 - c;
      out.at_dx(r, c) = int16_t(-frame.at_dx(r, mc));
      out.at_dy(r, c) = frame.at_dy(r, mc);
    }
  }
  return out;
}

namespace {

constexpr float kScales[4] = {1.0f, 0.875f, 0.75f, 0.66f};

// offsets: center + 4 corners, as fractions of the free space
constexpr float kOffsets[5][2] = {
    {0.5f, 0.5f}, {0.0f, 0.0f}, {0.0f, 1.0f}, {1.0f, 0.0f}, {1.0f, 1.0f}};

int16_t round_i16(float v) {
  return int16_t(std::clamp(std::lround(v), long(-32768), long(32767)));
}

// bilinear sample of one plane with the half-pixel mapping
float sample_plane(const int16_t* plane, int h, int w, int row_off, int col_off,
                   float src_r, float src_c) {
  src_r = std::clamp(src_r, 0.0f, float(h - 1));
  src_c = std::clamp(src_c, 0.0f, float(h - 1));
  const int r0 = int(src_r), c0 = int(src_c);
  const int r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const float fr = src_r - float(r0), fc = src_c - float(c0);
  auto at = [&](int r, int c) {
    return float(plane[size_t(row_off + r) * w + (col_off + c)]);
  };
  return at(r0, c0) * (1 - fr) * (1 - fc) + at(r0, c1) * (1 - fr) * fc +
         at(r1, c0) * fr * (1 - fc) + at(r1, c1) * fr * fc;
}

}  // namespace

CropParams draw_multiscale_crop(int height, int width, Rng& rng) {
  const int short_side = std::min(height, width);
  const float s = kScales[rng.next_uint(4)];
  int side = int(std::lround(short_side * s));
  side = std::clamp(side, 1, short_side);
  const auto& off = kOffsets[rng.next_uint(5)];
  CropParams p;
  p.side = side;
  p.top = int(std::lround(off[0] * float(height - side)));
  p.left = int(std::lround(off[1] * float(width - side)));
  return p;
}

CropParams center_crop_params(int height, int width) {
  const int side = std::min(height, width);
  return CropParams{side, (height - side) / 2, (width - side) / 2};
}

MVFrame crop_resize(const MVFrame& frame, const CropParams& p, int out_size) {
  if (out_size < 1) throw ArgError("crop_resize: out_size < 1");
  if (p.side < 1 || p.top < 0 || p.left < 0 || p.top + p.side > frame.height ||
      p.left + p.side > frame.width)
    throw ArgError("crop_resize: crop outside frame");

  MVFrame out(out_size, out_size);
  if (p.side == out_size) {  // pure crop, no interpolation
    for (int r = 0; r < out_size; ++r)
      for (int c = 0; c < out_size; ++c) {
        out.at_dx(r, c) = frame.at_dx(p.top + r, p.left + c);
        out.at_dy(r, c) = frame.at_dy(p.top + r, p.left + c);
      }
    return out;
  }
  const float scale = float(p.side) / float(out_size);
  for (int r = 0; r < out_size; ++r) {
    const float src_r = (float(r) + 0.5f) * scale - 0.5f;
    for (int c = 0; c < out_size; ++c) {
      const float src_c = (float(c) + 0.5f) * scale - 0.5f;
      const float vx = sample_plane(frame.dx.data(), p.side, frame.width, p.top, p.left,
                                    src_r, src_c);
      const float vy = sample_plane(frame.dy.data(), p.side, frame.width, p.top, p.left,
                                    src_r, src_c);
      out.at_dx(r, c) = round_i16(vx);
      out.at_dy(r, c) = round_i16(vy);
    }
  }
  return out;
}

MVFrame multiscale_crop(const MVFrame& frame, int out_size, Rng& rng) {
  return crop_resize(frame, draw_multiscale_crop(frame.height, frame.width, rng), out_size);
}

MVFrame center_crop_resize(const MVFrame& frame, int out_size) {
  return crop_resize(frame, center_crop_params(frame.height, frame.width), out_size);
}

}  // namespace mvfuse
