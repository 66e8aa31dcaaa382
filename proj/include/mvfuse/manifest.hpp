#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mvfuse {

struct ManifestEntry {
  std::string video_id;
  int label = 0;
  std::string relative_path;  // MVT1 file, relative to the dataset root
};

// Split list mirroring the UCF101 official list style: one
// `relative_path label` pair per line, plus a separate class-index file
// with `class_id class_name` per line.
struct SplitManifest {
  std::string split_name;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  bool xor_mode = false;  // synthetic datasets only

  int num_classes() const { return int(class_names.size()); }
  void validate() const;
};

void write_manifest(const SplitManifest& m, const std::filesystem::path& list_path,
                    const std::filesystem::path& class_index_path);
SplitManifest read_manifest(const std::filesystem::path& list_path,
                            const std::filesystem::path& class_index_path);

}  // namespace mvfuse
