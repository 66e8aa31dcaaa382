#include "mvfuse/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mvfuse {

int argmax_lowest(const Eigen::VectorXf& v) {
  if (v.size() == 0) throw ArgError("argmax of empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = int(i);
  return best;
}

Eigen::MatrixXf MvOnlyViewModel::view_logits(const Tensor& views, const Eigen::VectorXf*) {
  Eigen::MatrixXf feats = backbone_.forward_features(views, false);
  return head_.forward_mat(feats, false);
}

Eigen::MatrixXf FusionViewModel::view_logits(const Tensor& views,
                                             const Eigen::VectorXf* f_app) {
  if (!f_app) throw ArgError("fusion model requires an appearance feature");
  if (f_app->size() != kAppearanceDim)
    throw ArgError("fusion model: appearance feature must be 512-d");
  Eigen::MatrixXf feats = backbone_.forward_features(views, false);
  Eigen::MatrixXf fused(feats.rows(), kFusedDim);
  fused.leftCols(kAppearanceDim).rowwise() = f_app->transpose();
  fused.rightCols(kMotionDim) = feats;
  return head_.forward(fused, false);
}

Tensor build_views(const MVClip& clip, const std::vector<int>& indices,
                   const CropParams& crop, bool flip, int out_size) {
  Tensor views(int(indices.size()), 2, out_size, out_size);
  for (size_t v = 0; v < indices.size(); ++v) {
    MVFrame frame = crop_resize(clip.frames[size_t(indices[v])], crop, out_size);
    if (flip) frame = hflip_mv(frame);
    const NormalizedMVFrame norm = normalize_mv(frame);
    for (int r = 0; r < out_size; ++r) {
      for (int c = 0; c < out_size; ++c) {
        views.at(int(v), 0, r, c) = norm.dx(r, c);
        views.at(int(v), 1, r, c) = norm.dy(r, c);
      }
    }
  }
  return views;
}

Eigen::VectorXf multiview_predict(const MVClip& clip, const Eigen::VectorXf* f_app,
                                  ViewModel& model, const ViewProtocol& protocol,
                                  int input_size, bool average_logits) {
  if (protocol.mode != SampleMode::kTestCenter)
    throw ArgError("multiview_predict requires the center-sampling protocol");
  if (model.needs_appearance() && !f_app)
    throw ArgError("multiview_predict: missing appearance feature for fusion model");
  if (clip.frames.empty()) throw ArgError("multiview_predict: empty clip");

  const auto indices = sample_test_indices(int(clip.frames.size()), protocol.n_segments);
  const CropParams crop = center_crop_params(clip.frames[0].height, clip.frames[0].width);
  const Tensor views = build_views(clip, indices, crop, false, input_size);
  const Eigen::MatrixXf logits = model.view_logits(views, f_app);

  if (average_logits) {
    Eigen::VectorXf mean = logits.colwise().mean().transpose();
    return nn::softmax(mean);
  }
  Eigen::VectorXf probs = Eigen::VectorXf::Zero(logits.cols());
  for (Eigen::Index v = 0; v < logits.rows(); ++v)
    probs += nn::softmax(logits.row(v).transpose());
  probs /= float(logits.rows());
  return probs;
}

double top1_accuracy(const std::vector<PredictionRecord>& log) {
  if (log.empty()) throw ArgError("top1_accuracy: empty prediction log");
  int64_t correct = 0;
  for (const auto& r : log) correct += (r.pred_label == r.true_label);
  return double(correct) / double(log.size());
}

std::map<int, double> per_class_accuracy(const std::vector<PredictionRecord>& log,
                                         int n_classes) {
  if (log.empty()) throw ArgError("per_class_accuracy: empty prediction log");
  std::map<int, int> total, correct;
  for (const auto& r : log) {
    if (r.true_label < 0 || r.true_label >= n_classes)
      throw ArgError("per_class_accuracy: label out of range");
    ++total[r.true_label];
    if (r.pred_label == r.true_label) ++correct[r.true_label];
  }
  std::map<int, double> acc;
  for (const auto& [cls, n] : total) acc[cls] = double(correct[cls]) / double(n);
  return acc;
}

Eigen::MatrixXi confusion_matrix(const std::vector<PredictionRecord>& log, int n_classes) {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (const auto& r : log) {
    if (r.true_label < 0 || r.true_label >= n_classes || r.pred_label < 0 ||
        r.pred_label >= n_classes)
      throw ArgError("confusion_matrix: label out of range");
    ++m(r.true_label, r.pred_label);
  }
  return m;
}

EvalResult summarize(std::vector<PredictionRecord> log, int n_classes) {
  EvalResult res;
  res.top1 = top1_accuracy(log);
  res.per_class = per_class_accuracy(log, n_classes);
  res.confusion = confusion_matrix(log, n_classes);
  res.log = std::move(log);
  return res;
}

EvalResult evaluate(const SplitManifest& manifest, const std::vector<MVClip>& clips,
                    ViewModel& model,
                    const std::map<std::string, Eigen::VectorXf>* f_app_by_id,
                    const ViewProtocol& protocol, int input_size, bool average_logits) {
  if (manifest.entries.size() != clips.size())
    throw ArgError("evaluate: manifest/clip count mismatch");
  std::vector<PredictionRecord> log;
  log.reserve(clips.size());
  for (size_t i = 0; i < clips.size(); ++i) {
    const auto& entry = manifest.entries[i];
    const Eigen::VectorXf* f_app = nullptr;
    if (model.needs_appearance()) {
      if (!f_app_by_id) throw ArgError("evaluate: fusion model needs an appearance cache");
      const auto it = f_app_by_id->find(entry.video_id);
      if (it == f_app_by_id->end())
        throw ArgError("evaluate: appearance cache misses video " + entry.video_id);
      f_app = &it->second;
    }
    PredictionRecord rec;
    rec.video_id = entry.video_id;
    rec.true_label = entry.label;
    rec.probs = multiview_predict(clips[i], f_app, model, protocol, input_size,
                                  average_logits);
    rec.pred_label = argmax_lowest(rec.probs);
    log.push_back(std::move(rec));
  }
  return summarize(std::move(log), manifest.num_classes());
}

std::vector<PredictionRecord> zero_shot_log(
    const SplitManifest& manifest,
    const std::map<std::string, Eigen::VectorXf>& f_app_by_id,
    const ClassTextLibrary& library) {
  std::vector<PredictionRecord> log;
  log.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const auto it = f_app_by_id.find(entry.video_id);
    if (it == f_app_by_id.end())
      throw ArgError("zero_shot_log: appearance cache misses video " + entry.video_id);
    auto [pred, scores] = zero_shot_classify(it->second, library);
    PredictionRecord rec;
    rec.video_id = entry.video_id;
    rec.true_label = entry.label;
    rec.pred_label = pred;
    rec.probs = nn::softmax(scores);
    log.push_back(std::move(rec));
  }
  return log;
}

void write_prediction_log(const std::vector<PredictionRecord>& log,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(8);
  for (const auto& r : log) {
    out << r.video_id << ' ' << r.true_label << ' ' << r.pred_label;
    for (Eigen::Index i = 0; i < r.probs.size(); ++i) out << ' ' << r.probs[i];
    out << '\n';
  }
  if (!out) throw IoError("write failure: " + path.string());
}

std::vector<PredictionRecord> read_prediction_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prediction log: " + path.string());
  std::vector<PredictionRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    PredictionRecord r;
    if (!(ls >> r.video_id >> r.true_label >> r.pred_label))
      throw FormatError("bad prediction log line: " + line);
    std::vector<float> probs;
    float p;
    while (ls >> p) probs.push_back(p);
    r.probs = Eigen::Map<Eigen::VectorXf>(probs.data(), Eigen::Index(probs.size()));
    log.push_back(std::move(r));
  }
  return log;
}

AblationTable ablation_table(const std::vector<AblationRow>& rows) {
  if (rows.empty()) throw ArgError("ablation_table: no rows");
  AblationTable t;
  double best_single = 0.0;
  for (size_t i = 0; i + 1 < rows.size(); ++i)
    best_single = std::max(best_single, rows[i].top1_pct);
  t.fusion_delta_pct = rows.size() > 1 ? rows.back().top1_pct - best_single : 0.0;

  std::ostringstream text, csv;
  text << std::fixed;
  csv << std::fixed;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %16s %18s %10s\n", "Model", "Params (M)",
                "Throughput (v/s)", "Top-1 (%)");
  text << buf;
  text << std::string(72, '-') << '\n';
  csv << "model,trainable_params_m,throughput_vps,top1_pct\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %16.2f %18.2f %10.1f\n", r.name.c_str(),
                  r.trainable_params_m, r.throughput_vps, r.top1_pct);
    text << buf;
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.2f,%.2f\n", r.name.c_str(),
                  r.trainable_params_m, r.throughput_vps, r.top1_pct);
    csv << buf;
  }
  if (rows.size() > 1) {
    std::snprintf(buf, sizeof(buf), "fusion vs best single stream: %+.1f points\n",
                  t.fusion_delta_pct);
    text << buf;
  }
  t.text = text.str();
  t.csv = csv.str();
  return t;
}

ThroughputResult throughput_benchmark(const std::function<void()>& process_one_video,
                                      int n_videos, int warmup, int repetitions) {
  if (n_videos < 1) throw ArgError("throughput_benchmark: n_videos must be >= 1");
  if (repetitions < 1) throw ArgError("throughput_benchmark: repetitions must be >= 1");
  ThroughputResult res;
  for (int i = 0; i < warmup; ++i) process_one_video();
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n_videos; ++i) process_one_video();
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    res.reps_vps.push_back(double(n_videos) / std::max(sec, 1e-12));
  }
  res.mean_vps = std::accumulate(res.reps_vps.begin(), res.reps_vps.end(), 0.0) /
                 double(repetitions);
  double var = 0.0;
  for (double v : res.reps_vps) var += (v - res.mean_vps) * (v - res.mean_vps);
  res.std_vps = std::sqrt(var / double(repetitions));
  return res;
}

namespace {

std::string top3_line(const PredictionRecord& r, const std::vector<std::string>& names) {
  std::vector<int> order(size_t(r.probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return r.probs[a] > r.probs[b]; });
  std::ostringstream os;
  os.precision(3);
  os << std::fixed;
  const int k = std::min<int>(3, int(order.size()));
  for (int i = 0; i < k; ++i) {
    if (i) os << ", ";
    os << names[size_t(order[size_t(i)])] << " " << r.probs[order[size_t(i)]];
  }
  return os.str();
}

}  // namespace

std::string qualitative_report(const std::vector<PredictionRecord>& appearance_log,
                               const std::vector<PredictionRecord>& motion_log,
                               const std::vector<PredictionRecord>& fusion_log,
                               const std::vector<std::string>& class_names, int k) {
  std::map<std::string, const PredictionRecord*> app, mot;
  for (const auto& r : appearance_log) app[r.video_id] = &r;
  for (const auto& r : motion_log) mot[r.video_id] = &r;

  std::ostringstream os;
  int shown = 0;
  for (const auto& f : fusion_log) {
    if (shown >= k) break;
    const auto ai = app.find(f.video_id);
    const auto mi = mot.find(f.video_id);
    if (ai == app.end() || mi == mot.end()) continue;
    const bool fusion_right = f.pred_label == f.true_label;
    const bool both_wrong = ai->second->pred_label != f.true_label &&
                            mi->second->pred_label != f.true_label;
    if (!(fusion_right && both_wrong)) continue;
    os << "video " << f.video_id << " (true: " << class_names[size_t(f.true_label)]
       << ")\n";
    os << "  appearance-only: " << top3_line(*ai->second, class_names) << '\n';
    os << "  motion-only:     " << top3_line(*mi->second, class_names) << '\n';
    os << "  fusion:          " << top3_line(f, class_names) << '\n';
    ++shown;
  }
  return os.str();
}

}  // namespace mvfuse
