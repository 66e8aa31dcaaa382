#pragma once

#include <Eigen/Core>
#include <memory>

#include "mvfuse/nn.hpp"

namespace mvfuse {

// EfficientNet-B0 stage table: expansion, kernel, stride, output channels,
// repeats.
struct BlockSpec {
  int expand, kernel, stride, out_ch, repeats;
};
inline constexpr BlockSpec kEffNetB0Blocks[7] = {
    {1, 3, 1, 16, 1}, {6, 3, 2, 24, 2}, {6, 5, 2, 40, 2}, {6, 3, 2, 80, 3},
    {6, 5, 1, 112, 3}, {6, 5, 2, 192, 4}, {6, 3, 1, 320, 1}};
inline constexpr int kStemChannels = 32;
inline constexpr int kHeadChannels = 1280;

// Mobile inverted bottleneck with squeeze-excitation and an identity skip
// when stride 1 and matching channels.
class MBConv : public nn::Layer {
 public:
  MBConv(const std::string& name, int in_ch, const BlockSpec& spec, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<nn::Param*>& out) override { path_.collect(out); }
  void init_weights(Rng& rng) override;

  bool skip_;

 private:
  nn::Sequential path_;
};

// Cross-modality stem adaptation: per output filter, average the 3 input
// slices, rescale by 3/2, replicate into 2 channels. Preserves the
// response to channel-constant inputs.
Eigen::VectorXf adapt_stem(const Eigen::VectorXf& weights3, int out_ch, int kernel);

// EfficientNet-B0 feature extractor for 2-channel motion-vector input:
// prepended BatchNorm2d(2), adapted stem, seven MBConv stages, 1x1 head
// conv to 1280, global average pool.
class MotionBackbone {
 public:
  explicit MotionBackbone(uint64_t seed = 0, int in_channels = 2);

  // (N, in_ch, S, S) -> (N, 1280)
  Eigen::MatrixXf forward_features(const Tensor& x, bool train);
  void backward_features(const Eigen::MatrixXf& grad_features);

  std::vector<nn::Param*> params();
  int64_t trainable_param_count();
  uint64_t checksum();
  int feature_dim() const { return kHeadChannels; }
  int in_channels() const { return in_channels_; }

  // Installs an externally pretrained 3-channel stem via adapt_stem.
  void load_pretrained_stem(const Eigen::VectorXf& weights3);

  nn::Sequential& net() { return net_; }

 private:
  int in_channels_;
  nn::Sequential net_;
};

}  // namespace mvfuse
