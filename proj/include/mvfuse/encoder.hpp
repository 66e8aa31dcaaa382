#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>

#include "mvfuse/image.hpp"
#include "mvfuse/tensor.hpp"

namespace mvfuse {

// Frozen image/text embedding provider. Implementations must be
// deterministic: identical input, identical output, always.
class EncoderClient {
 public:
  virtual ~EncoderClient() = default;
  // preprocessed (1, 3, 224, 224) tensor -> unit-free 512-d embedding
  virtual Eigen::VectorXf encode_image(const Tensor& preprocessed) = 0;
  virtual Eigen::VectorXf encode_text(const std::string& prompt) = 0;
  static constexpr bool frozen() { return true; }
  static constexpr int dim() { return 512; }
};

// Canonical preprocessing for the appearance encoder: resize shorter side
// to 224 (bicubic), center-crop 224, per-channel normalization with the
// published CLIP constants.
Tensor preprocess_for_encoder(const RgbImage& image);

// Middle frame, the representative-frame policy.
int select_representative_frame(int num_frames);

Eigen::VectorXf encode_appearance(const RgbImage& frame, EncoderClient& encoder);

// Deterministic mock keyed to the synthetic dataset's signature scheme.
//
// Images: recovers the appearance id from the R/G flat-color encoding and
// returns a fixed unit direction for that id, plus `jitter` times a
// deterministic residual derived from the B channel. Text: recovers the
// appearance id from the "aNN" token in the prompt.
//
// With orthonormal=true and jitter=0 the directions are standard basis
// vectors, giving exact 0/1 cosine scores.
class SignatureMockEncoder : public EncoderClient {
 public:
  explicit SignatureMockEncoder(bool orthonormal = false, float jitter = 0.05f);
  Eigen::VectorXf encode_image(const Tensor& preprocessed) override;
  Eigen::VectorXf encode_text(const std::string& prompt) override;

  Eigen::VectorXf direction(int appearance_id) const;

 private:
  bool orthonormal_;
  float jitter_;
};

// Factory for the CLI `--encoder` flag. "pretrained" is intentionally not
// bundled (the CLIP weights and tokenizer live outside this artifact);
// requesting it produces a clear error pointing at the cache-import path.
std::unique_ptr<EncoderClient> make_encoder(const std::string& kind);

}  // namespace mvfuse
