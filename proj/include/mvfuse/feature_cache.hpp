#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mvfuse {

// Embedding dims used throughout the pipeline.
inline constexpr int kAppearanceDim = 512;
inline constexpr int kMotionDim = 1280;
inline constexpr int kFusedDim = kAppearanceDim + kMotionDim;  // 1792

struct FeatureRecord {
  std::string video_id;
  uint16_t label = 0;
  Eigen::VectorXf vec;
};

// "MCLF" container: magic, version u32 = 1, dim u32, count u64, then per
// record: id_len u16, UTF-8 id, label u16, dim f32. Little-endian, floats
// preserved bit-exactly.
void write_feature_cache(const std::vector<FeatureRecord>& records,
                         const std::filesystem::path& path);
std::vector<FeatureRecord> read_feature_cache(const std::filesystem::path& path);

// Checksum over the raw file bytes (change detection for freezing checks).
uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace mvfuse
