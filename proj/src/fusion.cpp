#include "mvfuse/fusion.hpp"

namespace mvfuse {

Eigen::VectorXf fuse(const Eigen::VectorXf& f_app, const Eigen::VectorXf& f_motion) {
  if (f_app.size() != kAppearanceDim)
    throw ArgError("fuse: appearance feature must be 512-d, got " +
                   std::to_string(f_app.size()));
  if (f_motion.size() != kMotionDim)
    throw ArgError("fuse: motion feature must be 1280-d, got " +
                   std::to_string(f_motion.size()));
  Eigen::VectorXf out(kFusedDim);
  out.head(kAppearanceDim) = f_app;
  out.tail(kMotionDim) = f_motion;
  return out;
}

Eigen::VectorXf fused_appearance_part(const Eigen::VectorXf& fused) {
  if (fused.size() != kFusedDim) throw ArgError("fused feature must be 1792-d");
  return fused.head(kAppearanceDim);
}

Eigen::VectorXf fused_motion_part(const Eigen::VectorXf& fused) {
  if (fused.size() != kFusedDim) throw ArgError("fused feature must be 1792-d");
  return fused.tail(kMotionDim);
}

FusionHead::FusionHead(int n_classes, uint64_t seed, int in_dim, int hidden_dim,
                       float dropout_rate)
    : fc1_("head.fc1", in_dim, hidden_dim),
      fc2_("head.fc2", hidden_dim, n_classes),
      dropout_rate_(dropout_rate),
      rng_(seed ^ 0xd1f75e5eb8c0ffeeull) {
  Rng init(seed);
  fc1_.init_weights(init);
  fc2_.init_weights(init);
}

Eigen::MatrixXf FusionHead::forward(const Eigen::MatrixXf& fused, bool train) {
  Eigen::MatrixXf h = fc1_.forward_mat(fused, train);
  relu_mask_ = (h.array() > 0.0f).cast<float>();
  h = h.cwiseProduct(relu_mask_);
  if (train && dropout_rate_ > 0.0f) {
    drop_mask_.resize(h.rows(), h.cols());
    const float keep_scale = 1.0f / (1.0f - dropout_rate_);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      for (Eigen::Index i = 0; i < h.rows(); ++i)
        drop_mask_(i, j) = rng_.next_float() < dropout_rate_ ? 0.0f : keep_scale;
    h = h.cwiseProduct(drop_mask_);
  } else {
    drop_mask_.resize(0, 0);
  }
  return fc2_.forward_mat(h, train);
}

Eigen::MatrixXf FusionHead::backward(const Eigen::MatrixXf& grad_logits) {
  Eigen::MatrixXf gh = fc2_.backward_mat(grad_logits);
  if (drop_mask_.size() > 0) gh = gh.cwiseProduct(drop_mask_);
  gh = gh.cwiseProduct(relu_mask_);
  return fc1_.backward_mat(gh);
}

Eigen::VectorXf FusionHead::forward_one(const Eigen::VectorXf& fused, bool train) {
  Eigen::MatrixXf y = forward(fused.transpose(), train);
  return y.row(0).transpose();
}

std::vector<nn::Param*> FusionHead::params() {
  std::vector<nn::Param*> ps;
  fc1_.collect(ps);
  fc2_.collect(ps);
  return ps;
}

int64_t FusionHead::trainable_param_count() {
  auto ps = params();
  return nn::count_trainable_params(ps);
}

uint64_t FusionHead::checksum() {
  uint64_t h = 0xcbf29ce484222325ull;
  for (auto* p : params()) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data(), size_t(p->value.size()) * sizeof(float), h);
  }
  return h;
}

}  // namespace mvfuse
