#include "mvfuse/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mvfuse/common.hpp"

namespace mvfuse {

void SplitManifest::validate() const {
  if (class_names.empty()) throw ArgError("manifest: no classes");
  std::unordered_set<std::string> ids;
  for (const auto& e : entries) {
    if (e.label < 0 || e.label >= num_classes())
      throw ArgError("manifest: label out of range for " + e.video_id);
    if (!ids.insert(e.video_id).second)
      throw ArgError("manifest: duplicate video id " + e.video_id);
  }
}

void write_manifest(const SplitManifest& m, const std::filesystem::path& list_path,
                    const std::filesystem::path& class_index_path) {
  m.validate();
  {
    std::ofstream os(list_path, std::ios::trunc);
    if (!os) throw IoError("manifest: cannot write " + list_path.string());
    if (m.xor_mode) os << "# xor\n";
    for (const auto& e : m.entries) os << e.relative_path << ' ' << e.label << '\n';
  }
  {
    std::ofstream os(class_index_path, std::ios::trunc);
    if (!os) throw IoError("manifest: cannot write " + class_index_path.string());
    for (size_t i = 0; i < m.class_names.size(); ++i) os << i << ' ' << m.class_names[i] << '\n';
  }
}

SplitManifest read_manifest(const std::filesystem::path& list_path,
                            const std::filesystem::path& class_index_path) {
  SplitManifest m;
  m.split_name = list_path.stem().string();
  {
    std::ifstream is(class_index_path);
    if (!is) throw IoError("manifest: cannot open " + class_index_path.string());
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      int id;
      std::string name;
      if (!(ss >> id >> name)) throw FormatError("manifest: bad class-index line: " + line);
      if (id != int(m.class_names.size()))
        throw FormatError("manifest: class ids must be dense and ordered");
      m.class_names.push_back(name);
    }
  }
  {
    std::ifstream is(list_path);
    if (!is) throw IoError("manifest: cannot open " + list_path.string());
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (line.find("xor") != std::string::npos) m.xor_mode = true;
        continue;
      }
      std::istringstream ss(line);
      ManifestEntry e;
      if (!(ss >> e.relative_path >> e.label))
        throw FormatError("manifest: bad list line: " + line);
      e.video_id = std::filesystem::path(e.relative_path).stem().string();
      m.entries.push_back(std::move(e));
    }
  }
  m.validate();
  return m;
}

}  // namespace mvfuse
