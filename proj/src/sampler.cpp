#include "mvfuse/sampler.hpp"

#include <algorithm>

namespace mvfuse {

namespace {

void check(int num_frames, int n_segments) {
  if (num_frames < 1) throw ArgError("sampler: num_frames must be >= 1");
  if (n_segments < 1) throw ArgError("sampler: n_segments must be >= 1");
}

}  // namespace

std::vector<int> sample_train_indices(int num_frames, int n_segments, Rng& rng) {
  check(num_frames, n_segments);
  std::vector<int> out(n_segments);
  const int64_t t = num_frames;
  for (int k = 0; k < n_segments; ++k) {
    const int start = int(int64_t(k) * t / n_segments);
    const int end = int(int64_t(k + 1) * t / n_segments);
    if (end > start)
      out[k] = start + int(rng.next_uint(uint32_t(end - start)));
    else
      out[k] = std::min(start, num_frames - 1);
  }
  return out;
}

std::vector<int> sample_test_indices(int num_frames, int n_segments) {
  check(num_frames, n_segments);
  std::vector<int> out(n_segments);
  const int64_t t = num_frames;
  for (int k = 0; k < n_segments; ++k) {
    const int start = int(int64_t(k) * t / n_segments);
    const int end = int(int64_t(k + 1) * t / n_segments);
    if (end > start)
      out[k] = start + (end - start) / 2;
    else
      out[k] = std::min(start, num_frames - 1);
  }
  return out;
}

}  // namespace mvfuse
