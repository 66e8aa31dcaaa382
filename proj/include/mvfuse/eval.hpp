#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mvfuse/backbone.hpp"
#include "mvfuse/fusion.hpp"
#include "mvfuse/manifest.hpp"
#include "mvfuse/mv_clip.hpp"
#include "mvfuse/sampler.hpp"
#include "mvfuse/textlib.hpp"
#include "mvfuse/transforms.hpp"

namespace mvfuse {

struct PredictionRecord {
  std::string video_id;
  int true_label = 0;
  int pred_label = 0;
  Eigen::VectorXf probs;  // mean over views, sums to 1
};

// argmax with ties broken toward the lowest index
int argmax_lowest(const Eigen::VectorXf& v);

// Per-view logits producer used by the multi-view protocol.
class ViewModel {
 public:
  virtual ~ViewModel() = default;
  // (V, 2, S, S) normalized MV views -> (V, C) logits, eval mode
  virtual Eigen::MatrixXf view_logits(const Tensor& views, const Eigen::VectorXf* f_app) = 0;
  virtual bool needs_appearance() const { return false; }
};

class MvOnlyViewModel : public ViewModel {
 public:
  MvOnlyViewModel(MotionBackbone& backbone, nn::Linear& head)
      : backbone_(backbone), head_(head) {}
  Eigen::MatrixXf view_logits(const Tensor& views, const Eigen::VectorXf* f_app) override;

 private:
  MotionBackbone& backbone_;
  nn::Linear& head_;
};

class FusionViewModel : public ViewModel {
 public:
  FusionViewModel(MotionBackbone& backbone, FusionHead& head)
      : backbone_(backbone), head_(head) {}
  Eigen::MatrixXf view_logits(const Tensor& views, const Eigen::VectorXf* f_app) override;
  bool needs_appearance() const override { return true; }

 private:
  MotionBackbone& backbone_;
  FusionHead& head_;
};

// Stack normalized (dx, dy) views for the given frame indices after a
// shared crop (and optional MV-aware flip).
Tensor build_views(const MVClip& clip, const std::vector<int>& indices,
                   const CropParams& crop, bool flip, int out_size);

// Center-sampled multi-view prediction: per-view softmax, arithmetic mean
// over views. `average_logits` switches to mean-logits-then-softmax.
Eigen::VectorXf multiview_predict(const MVClip& clip, const Eigen::VectorXf* f_app,
                                  ViewModel& model, const ViewProtocol& protocol,
                                  int input_size, bool average_logits = false);

struct EvalResult {
  double top1 = 0.0;
  std::map<int, double> per_class;
  Eigen::MatrixXi confusion;  // rows = true, cols = predicted
  std::vector<PredictionRecord> log;
};

double top1_accuracy(const std::vector<PredictionRecord>& log);
std::map<int, double> per_class_accuracy(const std::vector<PredictionRecord>& log,
                                         int n_classes);
Eigen::MatrixXi confusion_matrix(const std::vector<PredictionRecord>& log, int n_classes);
EvalResult summarize(std::vector<PredictionRecord> log, int n_classes);

EvalResult evaluate(const SplitManifest& manifest, const std::vector<MVClip>& clips,
                    ViewModel& model,
                    const std::map<std::string, Eigen::VectorXf>* f_app_by_id,
                    const ViewProtocol& protocol, int input_size,
                    bool average_logits = false);

// Appearance-only (zero-shot) predictions; probs = softmax of cosine scores.
std::vector<PredictionRecord> zero_shot_log(
    const SplitManifest& manifest,
    const std::map<std::string, Eigen::VectorXf>& f_app_by_id,
    const ClassTextLibrary& library);

// Line format: video_id true pred p0 p1 ... p{C-1}
void write_prediction_log(const std::vector<PredictionRecord>& log,
                          const std::filesystem::path& path);
std::vector<PredictionRecord> read_prediction_log(const std::filesystem::path& path);

struct AblationRow {
  std::string name;
  double trainable_params_m = 0.0;  // millions
  double throughput_vps = 0.0;      // videos per second
  double top1_pct = 0.0;            // percent
};
struct AblationTable {
  std::string text;
  std::string csv;
  double fusion_delta_pct = 0.0;  // last row minus best of the preceding rows
};
// Rows in presentation order, unimodal baselines first, fusion last.
AblationTable ablation_table(const std::vector<AblationRow>& rows);

struct ThroughputResult {
  double mean_vps = 0.0;
  double std_vps = 0.0;
  std::vector<double> reps_vps;
};
// Wall-clock videos/sec: `warmup` untimed calls, then `n_videos` timed
// calls, repeated `repetitions` times.
ThroughputResult throughput_benchmark(const std::function<void()>& process_one_video,
                                      int n_videos, int warmup, int repetitions = 3);

// Videos the fusion model gets right while both unimodal models are wrong,
// with each model's top-3 classes; at most k entries.
std::string qualitative_report(const std::vector<PredictionRecord>& appearance_log,
                               const std::vector<PredictionRecord>& motion_log,
                               const std::vector<PredictionRecord>& fusion_log,
                               const std::vector<std::string>& class_names, int k);

}  // namespace mvfuse
