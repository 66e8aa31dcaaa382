#include "mvfuse/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "mvfuse/feature_cache.hpp"

namespace mvfuse {

namespace {

// Published CLIP normalization constants.
constexpr float kMean[3] = {0.48145466f, 0.4578275f, 0.40821073f};
constexpr float kStd[3] = {0.26862954f, 0.26130258f, 0.27577711f};
constexpr int kInputSize = 224;

// Catmull-Rom cubic kernel (a = -0.5).
float cubic(float x) {
  x = std::abs(x);
  if (x < 1.0f) return (1.5f * x - 2.5f) * x * x + 1.0f;
  if (x < 2.0f) return ((-0.5f * x + 2.5f) * x - 4.0f) * x + 2.0f;
  return 0.0f;
}

// Bicubic resize of one channel, half-pixel sampling convention.
void resize_channel(const RgbImage& src, int ch, int out_h, int out_w,
                    std::vector<float>& out) {
  out.assign(size_t(out_h) * out_w, 0.0f);
  const float sy = float(src.height) / float(out_h);
  const float sx = float(src.width) / float(out_w);
  for (int r = 0; r < out_h; ++r) {
    const float fy = (float(r) + 0.5f) * sy - 0.5f;
    const int iy = int(std::floor(fy));
    const float ty = fy - float(iy);
    float wy[4];
    for (int k = 0; k < 4; ++k) wy[k] = cubic(float(k - 1) - ty);
    for (int c = 0; c < out_w; ++c) {
      const float fx = (float(c) + 0.5f) * sx - 0.5f;
      const int ix = int(std::floor(fx));
      const float tx = fx - float(ix);
      float wx[4];
      for (int k = 0; k < 4; ++k) wx[k] = cubic(float(k - 1) - tx);
      float acc = 0.0f;
      for (int ky = 0; ky < 4; ++ky) {
        const int rr = std::clamp(iy - 1 + ky, 0, src.height - 1);
        for (int kx = 0; kx < 4; ++kx) {
          const int cc = std::clamp(ix - 1 + kx, 0, src.width - 1);
          acc += wy[ky] * wx[kx] * float(src.at(rr, cc, ch));
        }
      }
      out[size_t(r) * out_w + c] = acc;
    }
  }
}

}  // namespace

Tensor preprocess_for_encoder(const RgbImage& image) {
  if (image.height < 1 || image.width < 1) throw ArgError("preprocess: empty image");
  // resize shorter side to kInputSize, keep aspect
  const float scale = float(kInputSize) / float(std::min(image.height, image.width));
  const int rh = std::max(kInputSize, int(std::lround(image.height * scale)));
  const int rw = std::max(kInputSize, int(std::lround(image.width * scale)));
  const int top = (rh - kInputSize) / 2;
  const int left = (rw - kInputSize) / 2;

  Tensor out(1, 3, kInputSize, kInputSize);
  std::vector<float> plane;
  for (int ch = 0; ch < 3; ++ch) {
    resize_channel(image, ch, rh, rw, plane);
    for (int r = 0; r < kInputSize; ++r) {
      for (int c = 0; c < kInputSize; ++c) {
        const float v = plane[size_t(top + r) * rw + (left + c)] / 255.0f;
        out.at(0, ch, r, c) = (v - kMean[ch]) / kStd[ch];
      }
    }
  }
  return out;
}

int select_representative_frame(int num_frames) {
  if (num_frames < 1) throw ArgError("select_representative_frame: need at least one frame");
  return num_frames / 2;
}

Eigen::VectorXf encode_appearance(const RgbImage& frame, EncoderClient& encoder) {
  return encoder.encode_image(preprocess_for_encoder(frame));
}

SignatureMockEncoder::SignatureMockEncoder(bool orthonormal, float jitter)
    : orthonormal_(orthonormal), jitter_(jitter) {}

Eigen::VectorXf SignatureMockEncoder::direction(int appearance_id) const {
  if (appearance_id < 0) throw ArgError("mock encoder: negative appearance id");
  Eigen::VectorXf v = Eigen::VectorXf::Zero(dim());
  if (orthonormal_) {
    v[appearance_id % dim()] = 1.0f;
    return v;
  }
  Rng rng(0x9e3779b97f4a7c15ull ^ uint64_t(appearance_id));
  for (int i = 0; i < dim(); ++i) v[i] = rng.next_normal();
  v.normalize();
  return v;
}

namespace {

Eigen::VectorXf hashed_residual(uint64_t h) {
  Eigen::VectorXf v(EncoderClient::dim());
  Rng rng(h);
  for (int i = 0; i < v.size(); ++i) v[i] = rng.next_normal();
  v.normalize();
  return v;
}

}  // namespace

Eigen::VectorXf SignatureMockEncoder::encode_image(const Tensor& preprocessed) {
  if (preprocessed.c != 3) throw ArgError("mock encoder: expected a 3-channel tensor");
  // undo normalization, average each channel back to 8-bit scale
  double ch_mean[3];
  for (int ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (int r = 0; r < preprocessed.h; ++r)
      for (int c = 0; c < preprocessed.w; ++c)
        acc += double(preprocessed.at(0, ch, r, c)) * kStd[ch] + kMean[ch];
    ch_mean[ch] = 255.0 * acc / double(preprocessed.spatial());
  }
  // flat-color signature: R = 16*(a%15+1), G = 16*(a/15+1)
  const int rq = int(std::lround(ch_mean[0] / 16.0)) - 1;
  const int gq = int(std::lround(ch_mean[1] / 16.0)) - 1;
  if (rq < 0 || rq >= 15 || gq < 0)
    throw ArgError("mock encoder: image does not carry an appearance signature");
  const int a = rq + 15 * gq;

  Eigen::VectorXf v = direction(a);
  if (jitter_ > 0.0f) {
    const auto b = uint64_t(std::lround(ch_mean[2] * 8.0));
    v += jitter_ * hashed_residual(fnv1a64(&b, sizeof(b)));
    v.normalize();
  }
  return v;
}

Eigen::VectorXf SignatureMockEncoder::encode_text(const std::string& prompt) {
  static const std::regex sig(R"(a(\d+)m(\d+))");
  std::smatch m;
  if (!std::regex_search(prompt, m, sig))
    throw ArgError("mock encoder: prompt lacks an aNNmMM class token: " + prompt);
  const int a = std::stoi(m[1].str());
  Eigen::VectorXf v = direction(a);
  if (jitter_ > 0.0f) {
    v += 0.2f * jitter_ * hashed_residual(fnv1a64(prompt.data(), prompt.size()));
    v.normalize();
  }
  return v;
}

std::unique_ptr<EncoderClient> make_encoder(const std::string& kind) {
  if (kind == "mock") return std::make_unique<SignatureMockEncoder>(false, 0.05f);
  if (kind == "mock-orthonormal") return std::make_unique<SignatureMockEncoder>(true, 0.0f);
  if (kind == "pretrained")
    throw ArgError(
        "encoder 'pretrained': CLIP ViT-B/32 weights are not bundled with this "
        "binary. Export appearance features with the published model and import "
        "them as a feature cache (see README, 'Using a real encoder'), or use "
        "--encoder mock for synthetic data.");
  throw ArgError("unknown encoder kind: " + kind + " (expected mock, mock-orthonormal, pretrained)");
}

}  // namespace mvfuse
