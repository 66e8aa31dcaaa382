#pragma once

#include <filesystem>
#include <json.hpp>
#include <memory>
#include <vector>

#include "mvfuse/backbone.hpp"
#include "mvfuse/checkpoint.hpp"
#include "mvfuse/fusion.hpp"
#include "mvfuse/manifest.hpp"
#include "mvfuse/mv_clip.hpp"
#include "mvfuse/optim.hpp"

namespace mvfuse {

struct TrainConfig {
  std::string stage = "mv-only";  // "mv-only" | "fusion"
  int epochs = 200;
  float lr = 1e-2f;
  float weight_decay = 1e-4f;
  std::vector<int> decay_epochs = {80, 160};  // 1-based epoch numbers
  float decay_factor = 0.1f;
  bool decoupled_wd = false;  // true = decoupled (AdamW-style)
  int batch_size = 64;
  uint64_t seed = 0;
  int input_size = 224;
  int n_segments = 3;
  float hflip_prob = 0.5f;

  // knobs for desk-scale runs; 0 = off
  int max_steps = 0;                    // hard cap on optimizer steps
  bool stop_at_full_train_acc = false;  // early out for overfit checks
  int val_interval = 1;                 // epochs between validation passes, 0 = never
  int val_views = 8;                    // center views for best-checkpoint selection

  static TrainConfig mv_only_defaults();
  static TrainConfig fusion_defaults();
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Motion backbone plus the linear baseline head (1280 -> C).
struct MvModel {
  MotionBackbone backbone;
  nn::Linear head;

  MvModel(int n_classes, uint64_t seed = 0);
  std::vector<nn::Param*> params();
  int64_t trainable_param_count();
  int n_classes() const { return head.out_dim_; }
};

struct TrainReport {
  double best_val_top1 = 0.0;
  int best_epoch = 0;  // 1-based; 0 = no validation ran
  double final_train_acc = 0.0;
  int steps = 0;
  std::vector<double> epoch_losses;
};

// Cross-entropy training of backbone + linear head. Per step: TSN random
// segment sampling, one shared multi-scale crop per video, MV-aware
// horizontal flip, normalization, segment-feature mean, logits. Saves the
// checkpoint with the best center-crop validation Top-1 (the final weights
// when validation is disabled).
TrainReport train_mv_classifier(const SplitManifest& manifest,
                                const std::vector<MVClip>& clips, const TrainConfig& cfg,
                                MvModel& model, const std::filesystem::path& ckpt_out);

std::unique_ptr<MvModel> load_mv_model(const std::filesystem::path& ckpt_path);

// Head-only training on frozen features: cached 512-d appearance vectors
// fused with motion features from the frozen MV backbone (center 3-segment
// pass, precomputed once — valid because the eval-mode forward is
// deterministic). Verifies by checksum that neither the backbone weights
// nor the appearance cache changed.
TrainReport train_fusion_head(const SplitManifest& manifest,
                              const std::vector<MVClip>& clips,
                              const std::filesystem::path& appearance_cache_path,
                              const std::filesystem::path& mv_ckpt_path,
                              const TrainConfig& cfg, FusionHead& head,
                              const std::filesystem::path& ckpt_out);

std::unique_ptr<FusionHead> load_fusion_head(const std::filesystem::path& ckpt_path);

// Deterministic frozen-backbone motion feature for one clip (center
// n_segments sampling, center crop, eval mode, segment mean).
Eigen::VectorXf frozen_motion_feature(const MVClip& clip, MotionBackbone& backbone,
                                      int n_segments, int input_size);

}  // namespace mvfuse
