#pragma once

#include <vector>

#include "mvfuse/common.hpp"

namespace mvfuse {

enum class SampleMode { kTrainRandom, kTestCenter };

// View protocol: temporal segment count and crop policy.
struct ViewProtocol {
  int n_segments = 32;
  SampleMode mode = SampleMode::kTestCenter;
  int n_spatial_crops = 1;

  static ViewProtocol train_default() { return {3, SampleMode::kTrainRandom, 1}; }
  static ViewProtocol test_default() { return {32, SampleMode::kTestCenter, 1}; }
};

// TSN segment sampling. The stream is divided into n_segments contiguous
// near-equal segments [floor(k*T/N), floor((k+1)*T/N)). One index is drawn
// per non-empty segment; empty tail segments repeat the last frame so the
// result always has exactly n_segments entries.
std::vector<int> sample_train_indices(int num_frames, int n_segments, Rng& rng);
std::vector<int> sample_test_indices(int num_frames, int n_segments);

}  // namespace mvfuse
