#pragma once

#include <Eigen/Core>

#include "mvfuse/feature_cache.hpp"
#include "mvfuse/nn.hpp"

namespace mvfuse {

// [f_app ; f_motion]: appearance entries at [0,512), motion at [512,1792).
// No normalization or scaling.
Eigen::VectorXf fuse(const Eigen::VectorXf& f_app, const Eigen::VectorXf& f_motion);
Eigen::VectorXf fused_appearance_part(const Eigen::VectorXf& fused);
Eigen::VectorXf fused_motion_part(const Eigen::VectorXf& fused);

// Linear 1792->512, ReLU, Dropout(0.5), Linear 512->C. For C=101 this is
// exactly 969,829 trainable parameters.
class FusionHead {
 public:
  FusionHead(int n_classes, uint64_t seed, int in_dim = kFusedDim, int hidden_dim = 512,
             float dropout_rate = 0.5f);

  // (N, in_dim) -> (N, C). Train mode applies dropout; eval is deterministic.
  Eigen::MatrixXf forward(const Eigen::MatrixXf& fused, bool train);
  // gradient of the loss w.r.t. the logits -> gradient w.r.t. the input
  Eigen::MatrixXf backward(const Eigen::MatrixXf& grad_logits);

  Eigen::VectorXf forward_one(const Eigen::VectorXf& fused, bool train);

  std::vector<nn::Param*> params();
  int64_t trainable_param_count();
  uint64_t checksum();
  void reseed_dropout(uint64_t seed) { rng_ = Rng(seed); }

  int in_dim() const { return fc1_.in_dim_; }
  int n_classes() const { return fc2_.out_dim_; }

 private:
  nn::Linear fc1_;
  nn::Linear fc2_;
  float dropout_rate_;
  Rng rng_;
  Eigen::MatrixXf relu_mask_;
  Eigen::MatrixXf drop_mask_;  // inverted-dropout scaling, 0 or 1/(1-p)
};

}  // namespace mvfuse
