#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mvfuse {

// One motion-vector frame: dense 2-channel (dx, dy) signed pixel
// displacements, plane-ordered (all dx row-major, then all dy).
struct MVFrame {
  int height = 0;
  int width = 0;
  std::vector<int16_t> dx;
  std::vector<int16_t> dy;

  MVFrame() = default;
  MVFrame(int h, int w) : height(h), width(w), dx(size_t(h) * w, 0), dy(size_t(h) * w, 0) {}

  int16_t& at_dx(int r, int c) { return dx[size_t(r) * width + c]; }
  int16_t& at_dy(int r, int c) { return dy[size_t(r) * width + c]; }
  int16_t at_dx(int r, int c) const { return dx[size_t(r) * width + c]; }
  int16_t at_dy(int r, int c) const { return dy[size_t(r) * width + c]; }
};

// Ordered sequence of MV frames for one video.
struct MVClip {
  std::string video_id;
  int label = 0;
  std::vector<MVFrame> frames;

  // Throws ArgError if frames are empty, sizes disagree, or dims are
  // non-positive.
  void validate() const;
};

// "MVT1" container: magic, H and W as u16, frame count as u32, then per
// frame the dx plane followed by the dy plane, row-major i16. All values
// little-endian. video_id/label live in the manifest, not the file.
void write_mv_clip(const MVClip& clip, const std::filesystem::path& path);
MVClip read_mv_clip(const std::filesystem::path& path);

}  // namespace mvfuse
