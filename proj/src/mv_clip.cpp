#include "mvfuse/mv_clip.hpp"

#include <cstring>
#include <fstream>

#include "mvfuse/common.hpp"

namespace mvfuse {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  // host is little-endian on every platform we target
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("MVT1: truncated while reading ") + what);
  return v;
}

}  // namespace

void MVClip::validate() const {
  if (frames.empty()) throw ArgError("MVClip: no frames");
  const int h = frames[0].height, w = frames[0].width;
  if (h <= 0 || w <= 0) throw ArgError("MVClip: non-positive frame dimensions");
  for (const auto& f : frames) {
    if (f.height != h || f.width != w) throw ArgError("MVClip: inconsistent frame dimensions");
    if (f.dx.size() != size_t(h) * w || f.dy.size() != size_t(h) * w)
      throw ArgError("MVClip: plane size does not match dimensions");
  }
}

void write_mv_clip(const MVClip& clip, const std::filesystem::path& path) {
  clip.validate();
  const int h = clip.frames[0].height, w = clip.frames[0].width;
  if (h > 65535 || w > 65535) throw ArgError("MVT1: dimension exceeds u16 range");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("MVT1: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put<uint16_t>(os, uint16_t(h));
  put<uint16_t>(os, uint16_t(w));
  put<uint32_t>(os, uint32_t(clip.frames.size()));
  for (const auto& f : clip.frames) {
    os.write(reinterpret_cast<const char*>(f.dx.data()), std::streamsize(f.dx.size() * 2));
    os.write(reinterpret_cast<const char*>(f.dy.data()), std::streamsize(f.dy.size() * 2));
  }
  if (!os) throw IoError("MVT1: write failed: " + path.string());
}

MVClip read_mv_clip(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("MVT1: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("MVT1: bad magic in " + path.string());
  const int h = get<uint16_t>(is, "height");
  const int w = get<uint16_t>(is, "width");
  const uint32_t n = get<uint32_t>(is, "frame count");
  if (h == 0 || w == 0 || n == 0) throw FormatError("MVT1: degenerate dimensions");

  MVClip clip;
  clip.frames.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    MVFrame f(h, w);
    is.read(reinterpret_cast<char*>(f.dx.data()), std::streamsize(f.dx.size() * 2));
    is.read(reinterpret_cast<char*>(f.dy.data()), std::streamsize(f.dy.size() * 2));
    if (!is) throw FormatError("MVT1: truncated mid-frame in " + path.string());
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

}  // namespace mvfuse
