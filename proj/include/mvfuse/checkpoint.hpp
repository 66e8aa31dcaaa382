#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "mvfuse/nn.hpp"

namespace mvfuse {

// Versioned weight container ("MVCK"): JSON metadata (stage, config echo,
// epoch, best metric, references to frozen inputs) plus named float blobs.
// Round-trips bit-exactly.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Eigen::VectorXf>> tensors;

  const Eigen::VectorXf* find(const std::string& name) const;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copy live parameters (including non-trainable buffers) into / out of a
// checkpoint. Import is strict: every parameter must be present with a
// matching size; extra blobs in the file are ignored.
void export_params(const std::vector<nn::Param*>& params, Checkpoint& ckpt);
void import_params(const Checkpoint& ckpt, std::vector<nn::Param*>& params);

uint64_t params_checksum(const std::vector<nn::Param*>& params);

}  // namespace mvfuse
