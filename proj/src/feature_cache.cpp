#include "mvfuse/feature_cache.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include "mvfuse/common.hpp"

namespace mvfuse {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'L', 'F'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("MCLF: truncated while reading ") + what);
  return v;
}

}  // namespace

void write_feature_cache(const std::vector<FeatureRecord>& records,
                         const std::filesystem::path& path) {
  if (records.empty()) throw ArgError("MCLF: no records");
  const auto dim = records[0].vec.size();
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.vec.size() != dim) throw ArgError("MCLF: mixed feature dims");
    if (r.video_id.size() > 65535) throw ArgError("MCLF: video id too long");
    if (!seen.insert(r.video_id).second)
      throw ArgError("MCLF: duplicate video id: " + r.video_id);
  }

  // write to a temp file then rename, so a crash never leaves a torn cache
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("MCLF: cannot open for writing: " + tmp.string());
    os.write(kMagic, 4);
    put<uint32_t>(os, kVersion);
    put<uint32_t>(os, uint32_t(dim));
    put<uint64_t>(os, uint64_t(records.size()));
    for (const auto& r : records) {
      put<uint16_t>(os, uint16_t(r.video_id.size()));
      os.write(r.video_id.data(), std::streamsize(r.video_id.size()));
      put<uint16_t>(os, r.label);
      os.write(reinterpret_cast<const char*>(r.vec.data()), std::streamsize(dim * 4));
    }
    if (!os) throw IoError("MCLF: write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<FeatureRecord> read_feature_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("MCLF: cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("MCLF: bad magic in " + path.string());
  const uint32_t version = get<uint32_t>(is, "version");
  if (version != kVersion) throw FormatError("MCLF: unsupported version");
  const uint32_t dim = get<uint32_t>(is, "dim");
  const uint64_t count = get<uint64_t>(is, "count");

  std::vector<FeatureRecord> records;
  records.reserve(count);
  std::unordered_set<std::string> seen;
  for (uint64_t i = 0; i < count; ++i) {
    FeatureRecord r;
    const uint16_t id_len = get<uint16_t>(is, "id length");
    r.video_id.resize(id_len);
    is.read(r.video_id.data(), id_len);
    r.label = get<uint16_t>(is, "label");
    r.vec.resize(dim);
    is.read(reinterpret_cast<char*>(r.vec.data()), std::streamsize(dim) * 4);
    if (!is) throw FormatError("MCLF: truncated record in " + path.string());
    if (!seen.insert(r.video_id).second)
      throw FormatError("MCLF: duplicate video id: " + r.video_id);
    records.push_back(std::move(r));
  }
  return records;
}

uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checksum: cannot open: " + path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a64(buf, size_t(is.gcount()), h);
  }
  return h;
}

}  // namespace mvfuse
