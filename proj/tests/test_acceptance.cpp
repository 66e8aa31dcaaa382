// End-to-end acceptance suite: one pass/fail line per shipped guarantee.
// Exit code = number of failed criteria.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mvfuse/encoder.hpp>
#include <mvfuse/eval.hpp>
#include <mvfuse/flops.hpp>
#include <mvfuse/synthetic.hpp>
#include <mvfuse/textlib.hpp>
#include <mvfuse/train.hpp>
#include <sstream>

using namespace mvfuse;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": " << what;
  if (!detail.empty()) std::cout << "  [" << detail << "]";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

void criterion(int n, const std::string& what, const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    const auto [ok, detail] = fn();
    report(n, what, ok, detail);
  } catch (const std::exception& e) {
    report(n, what, false, std::string("exception: ") + e.what());
  }
}

SyntheticDataset make_set(int n_classes, int per_class, bool xor_mode, uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_classes = n_classes;
  cfg.videos_per_class = per_class;
  cfg.frames_per_video = 30;
  cfg.height = cfg.width = 56;
  cfg.xor_mode = xor_mode;
  cfg.seed = seed;
  return generate_synthetic_dataset(cfg);
}

std::map<std::string, Eigen::VectorXf> appearance_map(const SyntheticDataset& ds,
                                                      EncoderClient& enc) {
  std::map<std::string, Eigen::VectorXf> out;
  for (size_t i = 0; i < ds.manifest.entries.size(); ++i)
    out.emplace(ds.manifest.entries[i].video_id,
                encode_appearance(ds.proxy_frames[i], enc));
  return out;
}

TrainConfig desk_mv_config(uint64_t seed, int epochs) {
  TrainConfig cfg = TrainConfig::mv_only_defaults();
  cfg.epochs = epochs;
  cfg.lr = 1e-2f;
  cfg.batch_size = 8;
  cfg.input_size = 48;
  cfg.n_segments = 2;
  cfg.seed = seed;
  cfg.val_interval = 0;
  cfg.decay_epochs = {epochs * 3 / 5, epochs * 4 / 5};
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// view-statistics stub for the protocol-level criteria
class StubViewModel : public ViewModel {
 public:
  Eigen::MatrixXf view_logits(const Tensor& views, const Eigen::VectorXf*) override {
    Eigen::MatrixXf logits(views.n, 4);
    for (int v = 0; v < views.n; ++v) {
      double mean = 0.0;
      for (int r = 0; r < views.h; ++r)
        for (int c = 0; c < views.w; ++c) mean += double(views.at(v, 0, r, c));
      mean /= double(views.spatial());
      for (int k = 0; k < 4; ++k) logits(v, k) = float(std::sin(9.0 * mean * (k + 1)));
    }
    return logits;
  }
};

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "mvfuse_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion(1, "fusion head has exactly 969,829 trainable parameters", [] {
    FusionHead head(101, 0);
    const int64_t n = head.trainable_param_count();
    return std::make_pair(n == 969829, "counted " + std::to_string(n));
  });

  criterion(2, "feature dimensions are 512 (appearance), 1280 (motion), 1792 (fused)", [] {
    SignatureMockEncoder enc(false, 0.05f);
    RgbImage img(32, 32);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        img.at(r, c, 0) = 16;
        img.at(r, c, 1) = 16;
        img.at(r, c, 2) = 128;
      }
    const Eigen::VectorXf f_app = encode_appearance(img, enc);
    MotionBackbone bb(0);
    Tensor x(1, 2, 33, 33);
    x.data.setZero();
    const Eigen::MatrixXf f_mot = bb.forward_features(x, false);
    const Eigen::VectorXf fused = fuse(f_app, f_mot.row(0).transpose());
    const bool ok = f_app.size() == 512 && f_mot.cols() == 1280 && fused.size() == 1792;
    return std::make_pair(ok, std::string("512/1280/1792 measured ") +
                                  std::to_string(f_app.size()) + "/" +
                                  std::to_string(f_mot.cols()) + "/" +
                                  std::to_string(fused.size()));
  });

  criterion(3, "inference-cost table reproduces 4.4 / 12.5 / 16.9 GFLOPs within 0.1", [] {
    const auto rows = flops::builtin_cost_table({});
    const double per_view = flops::count_model_gflops(flops::describe_efficientnet_b0(2), {});
    const bool ok = rows.size() == 3 && std::abs(rows[0].total_gflops - 4.4) <= 0.1 &&
                    std::abs(rows[1].total_gflops - 12.5) <= 0.1 &&
                    std::abs(rows[2].total_gflops - 16.9) <= 0.1 &&
                    std::abs(per_view - 0.39) <= 0.02;
    return std::make_pair(ok, fmt(rows[0].total_gflops) + " / " + fmt(rows[1].total_gflops) +
                                  " / " + fmt(rows[2].total_gflops) + ", per-view " +
                                  fmt(per_view));
  });

  criterion(4, "displacement normalization: fixed points and bounded range", [] {
    bool ok = normalize_mv_value(20.0f) == 0.5f && normalize_mv_value(-20.0f) == -0.5f &&
              std::abs(normalize_mv_value(0.0f)) <= 1.0f / 255.0f;
    Rng rng(4);
    for (int i = 0; i < 100000 && ok; ++i) {
      const float x = (rng.next_float() - 0.5f) * 200.0f;
      const float y = normalize_mv_value(x);
      ok = y >= -0.5f && y <= 0.5f;
    }
    return std::make_pair(ok, "10^5 samples in [-0.5, 0.5]");
  });

  criterion(5, "flip is an exact involution and negates dx on 10^3 random frames", [] {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const int h = 1 + int(rng.next_uint(12));
      const int w = 1 + int(rng.next_uint(12));
      MVFrame f(h, w);
      for (auto& v : f.dx) v = int16_t(int(rng.next_uint(81)) - 40);
      for (auto& v : f.dy) v = int16_t(int(rng.next_uint(81)) - 40);
      const MVFrame g = hflip_mv(f);
      const MVFrame gg = hflip_mv(g);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const size_t i = size_t(r) * size_t(w) + size_t(c);
          const size_t m = size_t(r) * size_t(w) + size_t(w - 1 - c);
          if (g.dx[i] != int16_t(-f.dx[m]) || g.dy[i] != f.dy[m] ||
              gg.dx[i] != f.dx[i] || gg.dy[i] != f.dy[i])
            return std::make_pair(false, "mismatch at trial " + std::to_string(trial));
        }
    }
    return std::make_pair(true, std::string());
  });

  criterion(6, "segment sampler contracts over T in 1..1000, N in {3, 32}", [] {
    const std::vector<int> want = {5, 15, 25, 35, 45, 55, 65, 75, 85, 95, 105,
                                   115, 125, 135, 145, 155, 165, 175, 185, 195,
                                   205, 215, 225, 235, 245, 255, 265, 275, 285,
                                   295, 305, 315};
    if (sample_test_indices(320, 32) != want)
      return std::make_pair(false, std::string("320/32 grid mismatch"));
    for (int n : {3, 32})
      for (int t = 1; t <= 1000; ++t) {
        const auto a = sample_test_indices(t, n);
        if (a != sample_test_indices(t, n) || int(a.size()) != n)
          return std::make_pair(false, "T=" + std::to_string(t));
        for (size_t i = 0; i < a.size(); ++i) {
          if (a[i] < 0 || a[i] >= t) return std::make_pair(false, "bounds T=" + std::to_string(t));
          if (i > 0 && a[i] < a[i - 1])
            return std::make_pair(false, "order T=" + std::to_string(t));
        }
      }
    return std::make_pair(true, std::string("deterministic, length-N, in-bounds, sorted"));
  });

  criterion(7, "fusion training leaves the backbone and appearance cache bit-identical", [&] {
    const fs::path dir = work / "freeze";
    SyntheticConfig cfg;
    cfg.n_classes = 4;
    cfg.videos_per_class = 2;
    cfg.frames_per_video = 12;
    cfg.height = cfg.width = 40;
    cfg.seed = 21;
    const SyntheticDataset ds = generate_synthetic_dataset(cfg);
    write_synthetic_dataset(ds, dir);

    MvModel model(4, 1);
    TrainConfig mv_cfg = desk_mv_config(1, 1);
    mv_cfg.batch_size = 4;
    mv_cfg.input_size = 32;
    train_mv_classifier(ds.manifest, ds.clips, mv_cfg, model, dir / "mv.ckpt");
    SignatureMockEncoder enc(false, 0.05f);
    precompute_cache(ds.manifest, dir / "frames", enc, dir / "app.mclf");

    const uint64_t ckpt_before = file_checksum(dir / "mv.ckpt");
    const uint64_t cache_before = file_checksum(dir / "app.mclf");

    TrainConfig f_cfg = TrainConfig::fusion_defaults();
    f_cfg.epochs = 3;
    f_cfg.batch_size = 4;
    f_cfg.input_size = 32;
    f_cfg.n_segments = 2;
    f_cfg.val_interval = 0;
    FusionHead head(4, 0);
    train_fusion_head(ds.manifest, ds.clips, dir / "app.mclf", dir / "mv.ckpt", f_cfg,
                      head, dir / "fusion.ckpt");

    const bool ok = file_checksum(dir / "mv.ckpt") == ckpt_before &&
                    file_checksum(dir / "app.mclf") == cache_before;
    return std::make_pair(ok, "checksums before == after");
  });

  criterion(8, "joint-signature dataset: fusion >= 0.95 while each unimodal <= 0.60 (3 seeds)",
            [&] {
    double mv_sum = 0.0, app_sum = 0.0, fusion_sum = 0.0;
    const ViewProtocol protocol{16, SampleMode::kTestCenter, 1};
    for (uint64_t seed : {1, 2, 3}) {
      const fs::path dir = work / ("xor_seed" + std::to_string(seed));
      const SyntheticDataset train_ds = make_set(4, 8, true, seed);
      const SyntheticDataset test_ds = make_set(4, 8, true, seed + 100);
      write_synthetic_dataset(train_ds, dir);

      SignatureMockEncoder enc(false, 0.05f);
      precompute_cache(train_ds.manifest, dir / "frames", enc, dir / "app.mclf");

      // motion-only: trained end to end, scored on held-out videos
      MvModel model(4, seed);
      train_mv_classifier(train_ds.manifest, train_ds.clips, desk_mv_config(seed, 25),
                          model, dir / "mv.ckpt");
      MvOnlyViewModel mv_view(model.backbone, model.head);
      const EvalResult mv_res =
          evaluate(test_ds.manifest, test_ds.clips, mv_view, nullptr, protocol, 48);

      // appearance-only: zero-shot against the class text library
      const auto library =
          build_text_library(test_ds.manifest.class_names, default_templates(), enc);
      const auto test_app = appearance_map(test_ds, enc);
      const double app_acc =
          top1_accuracy(zero_shot_log(test_ds.manifest, test_app, library));

      // fusion: head trained on frozen features from both branches
      TrainConfig f_cfg = TrainConfig::fusion_defaults();
      f_cfg.epochs = 40;
      f_cfg.lr = 3e-3f;
      f_cfg.batch_size = 8;
      f_cfg.input_size = 48;
      f_cfg.n_segments = 2;
      f_cfg.seed = seed;
      f_cfg.val_interval = 0;
      FusionHead head(4, seed);
      train_fusion_head(train_ds.manifest, train_ds.clips, dir / "app.mclf",
                        dir / "mv.ckpt", f_cfg, head, dir / "fusion.ckpt");
      FusionViewModel fusion_view(model.backbone, head);
      const EvalResult fusion_res = evaluate(test_ds.manifest, test_ds.clips, fusion_view,
                                             &test_app, protocol, 48);

      mv_sum += mv_res.top1;
      app_sum += app_acc;
      fusion_sum += fusion_res.top1;
    }
    const double mv = mv_sum / 3.0, app = app_sum / 3.0, fu = fusion_sum / 3.0;
    const bool ok = fu >= 0.95 && mv <= 0.60 && app <= 0.60;
    return std::make_pair(ok, "fusion " + fmt(fu) + ", motion-only " + fmt(mv) +
                                  ", appearance-only " + fmt(app));
  });

  criterion(9, "motion pathway reaches 100% training accuracy within 200 steps", [&] {
    const SyntheticDataset ds = make_set(4, 8, false, 31);
    TrainConfig cfg = desk_mv_config(31, 200);
    cfg.lr = 3e-3f;
    cfg.batch_size = 16;
    cfg.decay_epochs = {80, 160};
    cfg.max_steps = 200;
    cfg.stop_at_full_train_acc = true;
    MvModel model(4, 31);
    const TrainReport rep = train_mv_classifier(ds.manifest, ds.clips, cfg, model,
                                                work / "overfit.ckpt");
    const bool ok = rep.final_train_acc == 1.0 && rep.steps <= 200;
    return std::make_pair(ok, "train acc " + fmt(rep.final_train_acc) + " after " +
                                  std::to_string(rep.steps) + " steps");
  });

  criterion(10, "linear-head cross-entropy gradient matches finite differences (<= 1e-4)", [] {
    nn::Linear lin("acc_head", 6, 4);
    Rng rng(10);
    lin.init_weights(rng);
    Eigen::MatrixXf x(5, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_normal();
    const std::vector<int> labels = {0, 3, 1, 2, 1};

    std::vector<nn::Param*> params;
    lin.collect(params);
    nn::zero_grads(params);
    Eigen::MatrixXf g;
    nn::softmax_cross_entropy(lin.forward_mat(x, true), labels, &g);
    lin.backward_mat(g);

    // reference: double-precision loss as a function of the float params
    const Eigen::MatrixXd xd = x.cast<double>();
    auto loss_ref = [&]() {
      Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          W(lin.weight_.value.data(), 4, 6);
      Eigen::MatrixXd logits = xd * W.cast<double>().transpose();
      logits.rowwise() += lin.bias_.value.cast<double>().transpose();
      return nn::softmax_cross_entropy(logits, labels,
                                       (Eigen::MatrixXd*)nullptr);
    };

    double max_rel = 0.0;
    for (nn::Param* p : params) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        const float orig = p->value[i];
        const float vp = orig + 1e-3f;
        const float vm = orig - 1e-3f;
        p->value[i] = vp;
        const double lp = loss_ref();
        p->value[i] = vm;
        const double lm = loss_ref();
        p->value[i] = orig;
        const double num = (lp - lm) / (double(vp) - double(vm));
        const double rel = std::abs(double(p->grad[i]) - num) /
                           std::max(1e-3, std::abs(num));
        max_rel = std::max(max_rel, rel);
      }
    }
    return std::make_pair(max_rel <= 1e-4, "max relative error " + fmt(max_rel));
  });

  criterion(11, "orthonormal zero-shot: 100% accuracy with exact 1/0 cosine scores", [] {
    SignatureMockEncoder enc(true, 0.0f);
    const SyntheticDataset ds = make_set(4, 4, false, 41);
    const auto library =
        build_text_library(ds.manifest.class_names, default_templates(), enc);
    const auto f_app = appearance_map(ds, enc);

    const auto log = zero_shot_log(ds.manifest, f_app, library);
    if (top1_accuracy(log) != 1.0)
      return std::make_pair(false, "accuracy " + fmt(top1_accuracy(log)));
    for (const auto& [id, f] : f_app) {
      auto [pred, scores] = zero_shot_classify(f, library);
      for (int c = 0; c < 4; ++c) {
        const float want = (c == pred) ? 1.0f : 0.0f;
        if (std::abs(scores[c] - want) > 1e-6f)
          return std::make_pair(false, "score " + fmt(scores[c]) + " for class " +
                                           std::to_string(c));
      }
    }
    return std::make_pair(true, std::string());
  });

  criterion(12, "multi-view prediction is a simplex point, invariant to view order", [] {
    StubViewModel model;
    Rng rng(12);
    for (int trial = 0; trial < 4; ++trial) {
      MVClip clip;
      clip.video_id = "t";
      for (int t = 0; t < 48; ++t) {
        MVFrame f(12, 12);
        for (auto& v : f.dx) v = int16_t(int(rng.next_uint(41)) - 20);
        for (auto& v : f.dy) v = int16_t(int(rng.next_uint(41)) - 20);
        clip.frames.push_back(std::move(f));
      }
      const Eigen::VectorXf p =
          multiview_predict(clip, nullptr, model, ViewProtocol::test_default(), 8);
      if (std::abs(p.sum() - 1.0f) > 1e-6f || p.minCoeff() < 0.0f)
        return std::make_pair(false, std::string("sum ") + fmt(p.sum()));
      // same views, logit rows rotated: the mean must not move
      class Permuted : public ViewModel {
       public:
        StubViewModel inner;
        Eigen::MatrixXf view_logits(const Tensor& v, const Eigen::VectorXf* f) override {
          Eigen::MatrixXf l = inner.view_logits(v, f);
          Eigen::MatrixXf out = l;
          for (Eigen::Index i = 0; i < l.rows(); ++i)
            out.row(i) = l.row((i + 11) % l.rows());
          return out;
        }
      } permuted;
      const Eigen::VectorXf q =
          multiview_predict(clip, nullptr, permuted, ViewProtocol::test_default(), 8);
      if (!p.isApprox(q, 1e-6f)) return std::make_pair(false, std::string("order-sensitive"));
    }
    return std::make_pair(true, std::string());
  });

  criterion(13, "full-scale runs documented; throughput stability criterion holds on stubs",
            [] {
    // the full UCF101 protocol is documented, not run, at desk scale
    const fs::path readme = fs::path(MVFUSE_SOURCE_DIR) / "README.md";
    std::ifstream in(readme);
    if (!in) return std::make_pair(false, std::string("README.md not found"));
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    for (const char* needle :
         {"--views 32", "train-mv", "train-fusion", "precompute-clip", "Full-scale"})
      if (text.find(needle) == std::string::npos)
        return std::make_pair(false, std::string("README missing: ") + needle);

    // stability: repetitions of a stub workload within 20% of their mean
    volatile double sink = 0.0;
    const ThroughputResult r = throughput_benchmark(
        [&sink] {
          for (int i = 0; i < 200000; ++i) sink = sink + std::sqrt(double(i));
        },
        30, 5);
    for (double rep : r.reps_vps)
      if (std::abs(rep - r.mean_vps) / r.mean_vps > 0.20)
        return std::make_pair(false, "rep " + fmt(rep) + " vs mean " + fmt(r.mean_vps));
    return std::make_pair(true, "mean " + fmt(r.mean_vps) + " videos/sec, " +
                                    std::to_string(r.reps_vps.size()) + " reps");
  });

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
            << std::endl;
  return g_failures;
}
