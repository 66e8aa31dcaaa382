#include "mvfuse/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "mvfuse/eval.hpp"
#include "mvfuse/feature_cache.hpp"

namespace mvfuse {

TrainConfig TrainConfig::mv_only_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::fusion_defaults() {
  TrainConfig cfg;
  cfg.stage = "fusion";
  cfg.epochs = 50;
  cfg.lr = 1e-4f;
  cfg.weight_decay = 1e-4f;
  cfg.decay_epochs = {};
  cfg.decoupled_wd = true;
  return cfg;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"stage", stage},
          {"epochs", epochs},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"decay_epochs", decay_epochs},
          {"decay_factor", decay_factor},
          {"decoupled_wd", decoupled_wd},
          {"batch_size", batch_size},
          {"seed", seed},
          {"input_size", input_size},
          {"n_segments", n_segments},
          {"hflip_prob", hflip_prob},
          {"max_steps", max_steps},
          {"stop_at_full_train_acc", stop_at_full_train_acc},
          {"val_interval", val_interval},
          {"val_views", val_views}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("stage")) cfg.stage = j.at("stage").get<std::string>();
  if (cfg.stage == "fusion") cfg = fusion_defaults();
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("epochs", cfg.epochs);
  opt("lr", cfg.lr);
  opt("weight_decay", cfg.weight_decay);
  opt("decay_epochs", cfg.decay_epochs);
  opt("decay_factor", cfg.decay_factor);
  opt("decoupled_wd", cfg.decoupled_wd);
  opt("batch_size", cfg.batch_size);
  opt("seed", cfg.seed);
  opt("input_size", cfg.input_size);
  opt("n_segments", cfg.n_segments);
  opt("hflip_prob", cfg.hflip_prob);
  opt("max_steps", cfg.max_steps);
  opt("stop_at_full_train_acc", cfg.stop_at_full_train_acc);
  opt("val_interval", cfg.val_interval);
  opt("val_views", cfg.val_views);
  return cfg;
}

MvModel::MvModel(int n_classes, uint64_t seed)
    : backbone(seed), head("mv_head", kMotionDim, n_classes) {
  if (n_classes < 1) throw ArgError("MvModel: need at least one class");
  Rng rng(seed ^ 0x51ed270b8a3c197dull);
  head.init_weights(rng);
}

std::vector<nn::Param*> MvModel::params() {
  auto ps = backbone.params();
  head.collect(ps);
  return ps;
}

int64_t MvModel::trainable_param_count() {
  auto ps = params();
  return nn::count_trainable_params(ps);
}

namespace {

void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.next_uint(uint32_t(i))]);
}

float scheduled_lr(const TrainConfig& cfg, int epoch_1based) {
  float lr = cfg.lr;
  for (int d : cfg.decay_epochs)
    if (epoch_1based >= d) lr *= cfg.decay_factor;
  return lr;
}

void check_finite_loss(double loss, int epoch, int step) {
  if (!std::isfinite(loss))
    throw Error("training diverged: non-finite loss " + std::to_string(loss) +
                " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                " (try a lower learning rate)");
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

TrainReport train_mv_classifier(const SplitManifest& manifest,
                                const std::vector<MVClip>& clips, const TrainConfig& cfg,
                                MvModel& model, const std::filesystem::path& ckpt_out) {
  if (cfg.stage != "mv-only") throw ArgError("train_mv_classifier: config stage must be mv-only");
  if (manifest.entries.size() != clips.size())
    throw ArgError("train_mv_classifier: manifest/clip count mismatch");
  if (clips.empty()) throw ArgError("train_mv_classifier: empty training set");
  const int M = int(clips.size());
  const int C = manifest.num_classes();
  const int S = cfg.input_size;
  const int nseg = cfg.n_segments;

  auto params = model.params();
  nn::Adam opt(params, {.lr = cfg.lr, .weight_decay = cfg.weight_decay,
                        .decoupled = cfg.decoupled_wd});
  Rng rng(cfg.seed);

  auto save = [&](int epoch, double metric) {
    Checkpoint ckpt;
    ckpt.meta = {{"stage", "mv-only"},
                 {"n_classes", C},
                 {"epoch", epoch},
                 {"best_metric", metric},
                 {"config", cfg.to_json()}};
    export_params(params, ckpt);
    save_checkpoint(ckpt, ckpt_out);
  };

  TrainReport report;
  std::vector<int> order(size_t(M), 0);
  for (int i = 0; i < M; ++i) order[size_t(i)] = i;
  bool saved = false;
  bool stop = false;

  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    opt.set_lr(scheduled_lr(cfg, epoch));
    fisher_yates(order, rng);
    double epoch_loss = 0.0;
    int correct = 0, seen = 0, batches = 0;

    for (int start = 0; start < M && !stop; start += cfg.batch_size) {
      const int B = std::min(cfg.batch_size, M - start);
      Tensor x(B * nseg, 2, S, S);
      std::vector<int> labels(size_t(B), 0);
      for (int b = 0; b < B; ++b) {
        const int vi = order[size_t(start + b)];
        const MVClip& clip = clips[size_t(vi)];
        labels[size_t(b)] = manifest.entries[size_t(vi)].label;
        const auto indices = sample_train_indices(int(clip.frames.size()), nseg, rng);
        const CropParams crop =
            draw_multiscale_crop(clip.frames[0].height, clip.frames[0].width, rng);
        const bool flip = rng.next_float() < cfg.hflip_prob;
        const Tensor views = build_views(clip, indices, crop, flip, S);
        std::copy(views.data.data(), views.data.data() + views.numel(),
                  x.data.data() + int64_t(b) * views.numel());
      }

      Eigen::MatrixXf feats = model.backbone.forward_features(x, true);
      Eigen::MatrixXf vfeat(B, kMotionDim);
      for (int b = 0; b < B; ++b)
        vfeat.row(b) = feats.middleRows(b * nseg, nseg).colwise().mean();
      Eigen::MatrixXf logits = model.head.forward_mat(vfeat, true);

      Eigen::MatrixXf grad;
      const double loss = nn::softmax_cross_entropy(logits, labels, &grad);
      check_finite_loss(loss, epoch, report.steps);
      epoch_loss += loss;
      ++batches;
      for (int b = 0; b < B; ++b) {
        Eigen::VectorXf row = logits.row(b).transpose();
        correct += argmax_lowest(row) == labels[size_t(b)];
        ++seen;
      }

      nn::zero_grads(params);
      Eigen::MatrixXf gv = model.head.backward_mat(grad);
      Eigen::MatrixXf gfeats(B * nseg, kMotionDim);
      for (int b = 0; b < B; ++b)
        for (int s = 0; s < nseg; ++s)
          gfeats.row(b * nseg + s) = gv.row(b) / float(nseg);
      model.backbone.backward_features(gfeats);
      opt.step();
      ++report.steps;
      if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) stop = true;
    }

    report.epoch_losses.push_back(epoch_loss / std::max(1, batches));
    report.final_train_acc = double(correct) / std::max(1, seen);

    if (cfg.val_interval > 0 && (epoch % cfg.val_interval == 0 || stop)) {
      MvOnlyViewModel view(model.backbone, model.head);
      const ViewProtocol protocol{cfg.val_views, SampleMode::kTestCenter, 1};
      const EvalResult val = evaluate(manifest, clips, view, nullptr, protocol, S);
      if (!saved || val.top1 > report.best_val_top1) {
        report.best_val_top1 = val.top1;
        report.best_epoch = epoch;
        save(epoch, val.top1);
        saved = true;
      }
    }
    if (cfg.stop_at_full_train_acc && seen > 0 && correct == seen) stop = true;
  }

  if (!saved) {
    // validation disabled: final weights are the checkpoint
    save(int(report.epoch_losses.size()), report.final_train_acc);
  }
  return report;
}

std::unique_ptr<MvModel> load_mv_model(const std::filesystem::path& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.meta.value("stage", "") != "mv-only")
    throw FormatError("expected an mv-only checkpoint: " + ckpt_path.string());
  const int C = ckpt.meta.at("n_classes").get<int>();
  auto model = std::make_unique<MvModel>(C, 0);
  auto params = model->params();
  import_params(ckpt, params);
  return model;
}

Eigen::VectorXf frozen_motion_feature(const MVClip& clip, MotionBackbone& backbone,
                                      int n_segments, int input_size) {
  const auto indices = sample_test_indices(int(clip.frames.size()), n_segments);
  const CropParams crop = center_crop_params(clip.frames[0].height, clip.frames[0].width);
  const Tensor views = build_views(clip, indices, crop, false, input_size);
  Eigen::MatrixXf feats = backbone.forward_features(views, false);
  return feats.colwise().mean().transpose();
}

TrainReport train_fusion_head(const SplitManifest& manifest,
                              const std::vector<MVClip>& clips,
                              const std::filesystem::path& appearance_cache_path,
                              const std::filesystem::path& mv_ckpt_path,
                              const TrainConfig& cfg, FusionHead& head,
                              const std::filesystem::path& ckpt_out) {
  if (cfg.stage != "fusion") throw ArgError("train_fusion_head: config stage must be fusion");
  if (manifest.entries.size() != clips.size())
    throw ArgError("train_fusion_head: manifest/clip count mismatch");
  if (clips.empty()) throw ArgError("train_fusion_head: empty training set");
  const int M = int(clips.size());
  const int C = manifest.num_classes();
  if (head.n_classes() != C) throw ArgError("train_fusion_head: head class count mismatch");

  // frozen inputs + their fingerprints
  const uint64_t cache_sum_before = file_checksum(appearance_cache_path);
  std::map<std::string, Eigen::VectorXf> f_app;
  for (auto& rec : read_feature_cache(appearance_cache_path)) {
    if (rec.vec.size() != kAppearanceDim)
      throw FormatError("appearance cache has dim " + std::to_string(rec.vec.size()) +
                        ", expected 512");
    f_app.emplace(rec.video_id, std::move(rec.vec));
  }
  auto mv = load_mv_model(mv_ckpt_path);
  const uint64_t mv_ckpt_sum = file_checksum(mv_ckpt_path);
  const uint64_t backbone_sum_before = mv->backbone.checksum();

  // one-time frozen feature pass (eval mode is deterministic)
  Eigen::MatrixXf fused(M, kFusedDim);
  std::vector<int> labels(size_t(M), 0);
  for (int i = 0; i < M; ++i) {
    const auto& entry = manifest.entries[size_t(i)];
    const auto it = f_app.find(entry.video_id);
    if (it == f_app.end())
      throw ArgError("train_fusion_head: appearance cache misses video " + entry.video_id);
    fused.row(i) = fuse(it->second, frozen_motion_feature(clips[size_t(i)], mv->backbone,
                                                          cfg.n_segments, cfg.input_size))
                       .transpose();
    labels[size_t(i)] = entry.label;
  }

  auto params = head.params();
  nn::Adam opt(params, {.lr = cfg.lr, .weight_decay = cfg.weight_decay,
                        .decoupled = cfg.decoupled_wd});
  Rng rng(cfg.seed);
  head.reseed_dropout(cfg.seed ^ 0xfeedfacecafef00dull);

  TrainReport report;
  std::vector<int> order(size_t(M), 0);
  for (int i = 0; i < M; ++i) order[size_t(i)] = i;
  bool stop = false;
  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    opt.set_lr(scheduled_lr(cfg, epoch));
    fisher_yates(order, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < M && !stop; start += cfg.batch_size) {
      const int B = std::min(cfg.batch_size, M - start);
      Eigen::MatrixXf x(B, kFusedDim);
      std::vector<int> y(size_t(B), 0);
      for (int b = 0; b < B; ++b) {
        x.row(b) = fused.row(order[size_t(start + b)]);
        y[size_t(b)] = labels[size_t(order[size_t(start + b)])];
      }
      Eigen::MatrixXf logits = head.forward(x, true);
      Eigen::MatrixXf grad;
      const double loss = nn::softmax_cross_entropy(logits, y, &grad);
      check_finite_loss(loss, epoch, report.steps);
      epoch_loss += loss;
      ++batches;
      nn::zero_grads(params);
      head.backward(grad);
      opt.step();
      ++report.steps;
      if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) stop = true;
    }
    report.epoch_losses.push_back(epoch_loss / std::max(1, batches));
  }

  // eval-mode training accuracy on the frozen features
  {
    Eigen::MatrixXf logits = head.forward(fused, false);
    int correct = 0;
    for (int i = 0; i < M; ++i) {
      Eigen::VectorXf row = logits.row(i).transpose();
      correct += argmax_lowest(row) == labels[size_t(i)];
    }
    report.final_train_acc = double(correct) / double(M);
  }

  if (mv->backbone.checksum() != backbone_sum_before)
    throw Error("freezing violated: motion backbone weights changed during fusion training");
  if (file_checksum(appearance_cache_path) != cache_sum_before)
    throw Error("freezing violated: appearance cache file changed during fusion training");

  Checkpoint ckpt;
  ckpt.meta = {{"stage", "fusion"},
               {"n_classes", C},
               {"epoch", cfg.epochs},
               {"best_metric", report.final_train_acc},
               {"concat_order", "appearance,motion"},
               {"config", cfg.to_json()},
               {"references",
                {{"appearance_cache",
                  {{"path", appearance_cache_path.string()},
                   {"fnv1a64", hex64(cache_sum_before)}}},
                 {"mv_checkpoint",
                  {{"path", mv_ckpt_path.string()}, {"fnv1a64", hex64(mv_ckpt_sum)}}}}}};
  export_params(params, ckpt);
  save_checkpoint(ckpt, ckpt_out);
  return report;
}

std::unique_ptr<FusionHead> load_fusion_head(const std::filesystem::path& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.meta.value("stage", "") != "fusion")
    throw FormatError("expected a fusion checkpoint: " + ckpt_path.string());
  const int C = ckpt.meta.at("n_classes").get<int>();
  auto head = std::make_unique<FusionHead>(C, 0);
  auto params = head->params();
  import_params(ckpt, params);
  return head;
}

}  // namespace mvfuse
