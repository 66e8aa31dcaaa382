#include "mvfuse/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "mvfuse/common.hpp"

namespace mvfuse {

int appearance_id(int class_index, bool xor_mode) {
  return xor_mode ? class_index / 2 : class_index;
}

int motion_id(int class_index, bool xor_mode) {
  return xor_mode ? class_index % 2 : class_index;
}

std::string synthetic_class_name(int class_index, bool xor_mode) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "a%02dm%02d", appearance_id(class_index, xor_mode),
                motion_id(class_index, xor_mode));
  return buf;
}

namespace {

// dy displacement for a motion id: alternating sign, growing magnitude.
// dx stays near zero so the horizontal-flip augmentation (which negates
// dx) cannot flip one class into another.
int motion_dy(int m) {
  const int mag = 6 + 3 * (m / 2);
  return (m % 2) ? -mag : mag;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_classes < 1 || cfg.videos_per_class < 1 || cfg.frames_per_video < 1 ||
      cfg.height < 1 || cfg.width < 1)
    throw ArgError("synthetic: all counts must be >= 1");
  if (cfg.xor_mode && cfg.n_classes % 2 != 0)
    throw ArgError("synthetic: XOR mode needs an even class count");

  Rng rng(cfg.seed);
  SyntheticDataset ds;
  ds.manifest.split_name = "train";
  ds.manifest.xor_mode = cfg.xor_mode;
  for (int c = 0; c < cfg.n_classes; ++c)
    ds.manifest.class_names.push_back(synthetic_class_name(c, cfg.xor_mode));

  for (int c = 0; c < cfg.n_classes; ++c) {
    const int a = appearance_id(c, cfg.xor_mode);
    const int m = motion_id(c, cfg.xor_mode);
    if (a >= 15 * 15) throw ArgError("synthetic: appearance id exceeds encodable range");
    for (int v = 0; v < cfg.videos_per_class; ++v) {
      char idbuf[48];
      std::snprintf(idbuf, sizeof(idbuf), "c%02dv%03d", c, v);

      MVClip clip;
      clip.video_id = idbuf;
      clip.label = c;
      const int dy_base = motion_dy(m);
      for (int t = 0; t < cfg.frames_per_video; ++t) {
        MVFrame f(cfg.height, cfg.width);
        const int jitter = int(rng.next_uint(3)) - 1;  // per-frame +-1
        for (int r = 0; r < cfg.height; ++r) {
          for (int col = 0; col < cfg.width; ++col) {
            const int ndx = int(rng.next_uint(3)) - 1;
            const int ndy = int(rng.next_uint(3)) - 1;
            f.at_dx(r, col) = int16_t(ndx);
            f.at_dy(r, col) = int16_t(dy_base + jitter + ndy);
          }
        }
        clip.frames.push_back(std::move(f));
      }

      // flat-color proxy frame: R/G encode the appearance id in base 15,
      // B carries per-video jitter so appearance features are not all
      // byte-identical within a class
      RgbImage img(cfg.height, cfg.width);
      const uint8_t rv = uint8_t(16 * (a % 15 + 1));
      const uint8_t gv = uint8_t(16 * (a / 15 + 1));
      const uint8_t bv = uint8_t(120 + int(rng.next_uint(17)));
      for (int r = 0; r < cfg.height; ++r)
        for (int col = 0; col < cfg.width; ++col) {
          const int pn = int(rng.next_uint(5)) - 2;  // per-pixel +-2
          img.at(r, col, 0) = uint8_t(std::clamp(rv + pn, 0, 255));
          img.at(r, col, 1) = uint8_t(std::clamp(gv + pn, 0, 255));
          img.at(r, col, 2) = uint8_t(std::clamp(bv + pn, 0, 255));
        }

      ManifestEntry e;
      e.video_id = clip.video_id;
      e.label = c;
      e.relative_path = std::string("clips/") + idbuf + ".mvt";
      ds.manifest.entries.push_back(e);
      ds.clips.push_back(std::move(clip));
      ds.proxy_frames.push_back(std::move(img));
    }
  }
  return ds;
}

void write_synthetic_dataset(const SyntheticDataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "clips");
  fs::create_directories(root / "frames");
  write_manifest(ds.manifest, root / (ds.manifest.split_name + ".txt"), root / "classes.txt");
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    write_mv_clip(ds.clips[i], root / ds.manifest.entries[i].relative_path);
    write_ppm(ds.proxy_frames[i], root / "frames" / (ds.clips[i].video_id + ".ppm"));
  }
}

LoadedDataset load_dataset(const std::filesystem::path& root, const std::string& split) {
  LoadedDataset out;
  out.manifest = read_manifest(root / (split + ".txt"), root / "classes.txt");
  out.clips.reserve(out.manifest.entries.size());
  for (auto& e : out.manifest.entries) {
    MVClip clip = read_mv_clip(root / e.relative_path);
    clip.video_id = e.video_id;
    clip.label = e.label;
    out.clips.push_back(std::move(clip));
  }
  return out;
}

}  // namespace mvfuse
