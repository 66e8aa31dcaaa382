#include "mvfuse/image.hpp"

#include <fstream>
#include <string>

#include "mvfuse/common.hpp"

namespace mvfuse {

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  if (img.height <= 0 || img.width <= 0) throw ArgError("ppm: empty image");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("ppm: cannot write " + path.string());
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           std::streamsize(img.pixels.size()));
  if (!os) throw IoError("ppm: write failed " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("ppm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw FormatError("ppm: unsupported header in " + path.string());
  is.get();  // single whitespace after header
  RgbImage img(h, w);
  is.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  if (!is) throw FormatError("ppm: truncated " + path.string());
  return img;
}

}  // namespace mvfuse
