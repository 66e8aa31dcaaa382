#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mvfuse {

// Runtime failure carrying a human-readable reason. Callers that need to
// distinguish classes of failure (bad magic vs truncation vs argument) use
// the subclasses below.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct ArgError : Error {
  using Error::Error;
};

// Deterministic RNG wrapper. All randomized code in the project draws
// through these helpers so output bytes do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, n).
  uint32_t next_uint(uint32_t n) {
    // rejection sampling to avoid modulo bias
    const uint64_t range = 1ull << 32;
    const uint64_t limit = range - range % n;
    uint64_t v;
    do {
      v = engine_() & 0xffffffffull;
    } while (v >= limit);
    return static_cast<uint32_t>(v % n);
  }

  // Uniform float in [0, 1).
  float next_float() {
    return static_cast<float>(engine_() >> 40) * (1.0f / 16777216.0f);
  }

  // Standard normal via Box-Muller.
  float next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    float u1, u2;
    do {
      u1 = next_float();
    } while (u1 <= 1e-12f);
    u2 = next_float();
    const float r = std::sqrt(-2.0f * std::log(u1));
    const float theta = 6.28318530717958647692f * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

// FNV-1a 64-bit. Used for content checksums of parameter blobs and cache
// files (change detection, not cryptographic integrity).
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mvfuse
