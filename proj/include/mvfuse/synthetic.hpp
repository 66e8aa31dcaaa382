#pragma once

#include <filesystem>
#include <vector>

#include "mvfuse/image.hpp"
#include "mvfuse/manifest.hpp"
#include "mvfuse/mv_clip.hpp"

namespace mvfuse {

// Desk-scale synthetic data. Every class carries a motion signature (the
// sign and magnitude of the dy displacement, chosen to survive the
// MV-specific horizontal flip) and an appearance signature (a flat color
// whose R/G channels encode an id the mock encoder can decode).
//
// In XOR mode the class is identifiable only from the joint pair:
// appearance id = class/2, motion id = class%2, so with 4 classes each
// unimodal marginal is ambiguous between exactly 2 classes.
struct SyntheticConfig {
  int n_classes = 4;
  int videos_per_class = 8;
  int frames_per_video = 30;
  int height = 64;
  int width = 64;
  uint64_t seed = 0;
  bool xor_mode = false;
};

struct SyntheticDataset {
  SplitManifest manifest;
  std::vector<MVClip> clips;          // parallel to manifest.entries
  std::vector<RgbImage> proxy_frames; // one representative RGB frame per video
};

// ids for class c under the dataset's mode
int appearance_id(int class_index, bool xor_mode);
int motion_id(int class_index, bool xor_mode);

// Class-name convention "aAAmMM": encodes both signature ids so the mock
// text encoder can recover the appearance id from a rendered prompt.
std::string synthetic_class_name(int class_index, bool xor_mode);

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg);

// Layout under root: <split>.txt, classes.txt, clips/<id>.mvt,
// frames/<id>.ppm.
void write_synthetic_dataset(const SyntheticDataset& ds, const std::filesystem::path& root);

// Loads any dataset in the above layout (synthetic or externally produced).
struct LoadedDataset {
  SplitManifest manifest;
  std::vector<MVClip> clips;
};
LoadedDataset load_dataset(const std::filesystem::path& root, const std::string& split = "train");

}  // namespace mvfuse
