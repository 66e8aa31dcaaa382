#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mvfuse {

// 8-bit RGB image, interleaved row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;  // H*W*3

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(size_t(h) * w * 3, 0) {}

  uint8_t& at(int r, int c, int ch) { return pixels[(size_t(r) * width + c) * 3 + ch]; }
  uint8_t at(int r, int c, int ch) const { return pixels[(size_t(r) * width + c) * 3 + ch]; }
};

// Binary PPM (P6), the representative-frame storage for desk-scale runs.
void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace mvfuse
