#include "mvfuse/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mvfuse {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file");
  return v;
}

}  // namespace

const Eigen::VectorXf* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, v] : tensors)
    if (n == name) return &v;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(kMagic, 4);
    put<uint32_t>(out, kCheckpointVersion);
    const std::string meta = ckpt.meta.dump();
    put<uint64_t>(out, meta.size());
    out.write(meta.data(), std::streamsize(meta.size()));
    put<uint32_t>(out, uint32_t(ckpt.tensors.size()));
    for (const auto& [name, vec] : ckpt.tensors) {
      if (name.size() > 0xffff) throw ArgError("checkpoint: tensor name too long");
      put<uint16_t>(out, uint16_t(name.size()));
      out.write(name.data(), std::streamsize(name.size()));
      put<uint64_t>(out, uint64_t(vec.size()));
      out.write(reinterpret_cast<const char*>(vec.data()),
                std::streamsize(size_t(vec.size()) * sizeof(float)));
    }
    if (!out) throw IoError("write failure: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a checkpoint file (bad magic): " + path.string());
  const auto version = get<uint32_t>(in);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  const auto meta_len = get<uint64_t>(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), std::streamsize(meta_len));
  if (!in) throw FormatError("checkpoint: truncated metadata");
  try {
    ckpt.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint: bad metadata JSON: ") + e.what());
  }

  const auto count = get<uint32_t>(in);
  ckpt.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto size = get<uint64_t>(in);
    Eigen::VectorXf vec{Eigen::Index(size)};
    in.read(reinterpret_cast<char*>(vec.data()), std::streamsize(size * sizeof(float)));
    if (!in) throw FormatError("checkpoint: truncated tensor data");
    ckpt.tensors.emplace_back(std::move(name), std::move(vec));
  }
  return ckpt;
}

void export_params(const std::vector<nn::Param*>& params, Checkpoint& ckpt) {
  for (const auto* p : params) ckpt.tensors.emplace_back(p->name, p->value);
}

void import_params(const Checkpoint& ckpt, std::vector<nn::Param*>& params) {
  for (auto* p : params) {
    const Eigen::VectorXf* v = ckpt.find(p->name);
    if (!v) throw FormatError("checkpoint missing parameter: " + p->name);
    if (v->size() != p->value.size())
      throw FormatError("checkpoint size mismatch for " + p->name + ": " +
                        std::to_string(v->size()) + " vs " + std::to_string(p->value.size()));
    p->value = *v;
  }
}

uint64_t params_checksum(const std::vector<nn::Param*>& params) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : params) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data(), size_t(p->value.size()) * sizeof(float), h);
  }
  return h;
}

}  // namespace mvfuse
