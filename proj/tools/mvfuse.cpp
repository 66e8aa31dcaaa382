// Command-line entry point: synth / precompute-clip / train-mv /
// train-fusion / eval / flops. Exit codes: 0 ok, 1 runtime failure, 2 bad
// usage.
#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "mvfuse/eval.hpp"
#include "mvfuse/flops.hpp"
#include "mvfuse/synthetic.hpp"
#include "mvfuse/textlib.hpp"
#include "mvfuse/train.hpp"

using namespace mvfuse;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every command drops a frozen copy of its resolved configuration and a
// list of produced files next to its outputs.
struct RunOutputs {
  fs::path dir;
  json resolved_config;
  std::vector<std::string> files;

  explicit RunOutputs(const fs::path& d) : dir(d) { fs::create_directories(dir); }
  fs::path path(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
  void finish(const std::string& command) {
    resolved_config["command"] = command;
    std::ofstream cfg(dir / "resolved_config.json");
    cfg << resolved_config.dump(2) << '\n';
    json manifest = {{"command", command}, {"files", files}};
    std::ofstream out(dir / "outputs.json");
    out << manifest.dump(2) << '\n';
  }
};

std::string default_data_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("MVFUSE_DATA_ROOT")) return env;
  throw ArgError("no dataset root: pass --data or set MVFUSE_DATA_ROOT");
}

std::map<std::string, Eigen::VectorXf> load_app_map(const fs::path& cache) {
  std::map<std::string, Eigen::VectorXf> out;
  for (auto& rec : read_feature_cache(cache)) out.emplace(rec.video_id, std::move(rec.vec));
  return out;
}

TrainConfig resolve_train_config(CLI::App* cmd, const std::string& stage,
                                 const std::string& config_file, int epochs, double lr,
                                 int batch, uint64_t seed, int input_size, int max_steps,
                                 int val_interval, int n_segments) {
  TrainConfig cfg =
      stage == "fusion" ? TrainConfig::fusion_defaults() : TrainConfig::mv_only_defaults();
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ArgError("cannot open config file: " + config_file);
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw ArgError(std::string("bad config JSON: ") + e.what());
    }
    j["stage"] = stage;
    cfg = TrainConfig::from_json(j);
  }
  cfg.stage = stage;
  // explicit flags override the file
  if (cmd->count("--epochs")) cfg.epochs = epochs;
  if (cmd->count("--lr")) cfg.lr = float(lr);
  if (cmd->count("--batch")) cfg.batch_size = batch;
  if (cmd->count("--seed")) cfg.seed = seed;
  if (cmd->count("--input-size")) cfg.input_size = input_size;
  if (cmd->count("--max-steps")) cfg.max_steps = max_steps;
  if (cmd->count("--val-interval")) cfg.val_interval = val_interval;
  if (cmd->count("--segments")) cfg.n_segments = n_segments;
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"two-stream motion-vector video classifier"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  SyntheticConfig scfg;
  std::string synth_out;
  synth->add_option("--classes", scfg.n_classes, "number of classes");
  synth->add_option("--per-class", scfg.videos_per_class, "videos per class");
  synth->add_option("--frames", scfg.frames_per_video, "frames per video");
  synth->add_option("--size", scfg.height, "frame height and width");
  synth->add_flag("--xor", scfg.xor_mode, "joint-signature (XOR) labels");
  synth->add_option("--seed", scfg.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // ---- precompute-clip ----
  auto* pre = app.add_subcommand("precompute-clip", "precompute appearance features");
  std::string pre_data, pre_split = "train", pre_encoder = "mock", pre_out;
  pre->add_option("--data", pre_data, "dataset root (or MVFUSE_DATA_ROOT)");
  pre->add_option("--split", pre_split, "split name");
  pre->add_option("--encoder", pre_encoder, "mock | mock-orthonormal | pretrained");
  pre->add_option("--out", pre_out, "output cache file")->required();

  // ---- shared training flags ----
  std::string config_file;
  int epochs = 0, batch = 0, input_size = 0, max_steps = 0, val_interval = 0, segments = 0;
  double lr = 0.0;
  uint64_t seed = 0;
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file (flags override)");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--batch", batch, "batch size");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--input-size", input_size, "square input resolution");
    cmd->add_option("--max-steps", max_steps, "hard cap on optimizer steps (0 = off)");
    cmd->add_option("--val-interval", val_interval, "epochs between validations (0 = never)");
    cmd->add_option("--segments", segments, "temporal segments per video");
  };

  // ---- train-mv ----
  auto* tmv = app.add_subcommand("train-mv", "train the motion-vector classifier");
  std::string tmv_data, tmv_split = "train", tmv_out;
  tmv->add_option("--data", tmv_data, "dataset root (or MVFUSE_DATA_ROOT)");
  tmv->add_option("--split", tmv_split, "split name");
  tmv->add_option("--out", tmv_out, "output directory")->required();
  add_train_flags(tmv);

  // ---- train-fusion ----
  auto* tfu = app.add_subcommand("train-fusion", "train the fusion head");
  std::string tfu_data, tfu_split = "train", tfu_out, tfu_cache, tfu_mv_ckpt;
  tfu->add_option("--data", tfu_data, "dataset root (or MVFUSE_DATA_ROOT)");
  tfu->add_option("--split", tfu_split, "split name");
  tfu->add_option("--app-cache", tfu_cache, "appearance feature cache")->required();
  tfu->add_option("--mv-checkpoint", tfu_mv_ckpt, "trained MV checkpoint")->required();
  tfu->add_option("--out", tfu_out, "output directory")->required();
  add_train_flags(tfu);

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate a model on a split");
  std::string ev_data, ev_split = "train", ev_model, ev_ckpt, ev_cache, ev_mv_ckpt,
              ev_encoder = "mock", ev_out;
  int ev_views = 32, ev_input = 224;
  bool ev_logit_avg = false;
  ev->add_option("--data", ev_data, "dataset root (or MVFUSE_DATA_ROOT)");
  ev->add_option("--split", ev_split, "split name");
  ev->add_option("--model", ev_model, "clip | mv | fusion")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint (mv and fusion models)");
  ev->add_option("--mv-checkpoint", ev_mv_ckpt,
                 "MV checkpoint for the fusion backbone (default: the one the fusion "
                 "checkpoint references)");
  ev->add_option("--app-cache", ev_cache, "appearance cache (clip and fusion models)");
  ev->add_option("--encoder", ev_encoder, "text encoder for zero-shot class library");
  ev->add_option("--views", ev_views, "temporal views");
  ev->add_option("--input-size", ev_input, "square input resolution");
  ev->add_flag("--average-logits", ev_logit_avg, "average logits instead of probabilities");
  ev->add_option("--out", ev_out, "output directory")->required();

  // ---- flops ----
  auto* fl = app.add_subcommand("flops", "inference-cost table");
  std::string fl_ledger, fl_out;
  int fl_mac = 1;
  bool fl_no_fold = false;
  fl->add_option("--ledger", fl_ledger, "JSON ledger file (default: built-in models)");
  fl->add_option("--mac-flops", fl_mac, "FLOPs per multiply-accumulate (1 or 2)");
  fl->add_flag("--no-fold-norm", fl_no_fold, "count inference-time norms");
  fl->add_option("--out", fl_out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is always 2; --help stays 0
  }

  if (synth->parsed()) {
    if (scfg.n_classes < 1 || scfg.videos_per_class < 1 || scfg.frames_per_video < 1)
      throw ArgError("synth: counts must be positive");
    scfg.width = scfg.height;
    RunOutputs out(synth_out);
    const SyntheticDataset ds = generate_synthetic_dataset(scfg);
    write_synthetic_dataset(ds, synth_out);
    out.resolved_config = {{"classes", scfg.n_classes},   {"per_class", scfg.videos_per_class},
                           {"frames", scfg.frames_per_video}, {"size", scfg.height},
                           {"xor", scfg.xor_mode},        {"seed", scfg.seed}};
    out.files = {"train.txt", "classes.txt", "clips", "frames"};
    out.finish("synth");
    std::cout << "wrote " << ds.clips.size() << " videos, " << scfg.n_classes
              << " classes to " << synth_out << '\n';
    return 0;
  }

  if (pre->parsed()) {
    const fs::path root = default_data_root(pre_data);
    const LoadedDataset ds = load_dataset(root, pre_split);
    auto encoder = make_encoder(pre_encoder);
    precompute_cache(ds.manifest, root / "frames", *encoder, pre_out);
    std::cout << "wrote " << ds.manifest.entries.size() << " appearance features to "
              << pre_out << '\n';
    return 0;
  }

  if (tmv->parsed()) {
    const fs::path root = default_data_root(tmv_data);
    const LoadedDataset ds = load_dataset(root, tmv_split);
    const TrainConfig cfg = resolve_train_config(tmv, "mv-only", config_file, epochs, lr,
                                                 batch, seed, input_size, max_steps,
                                                 val_interval, segments);
    RunOutputs out(tmv_out);
    out.resolved_config = cfg.to_json();
    MvModel model(ds.manifest.num_classes(), cfg.seed);
    std::cout << "trainable params: " << model.trainable_param_count() << '\n';
    const TrainReport report =
        train_mv_classifier(ds.manifest, ds.clips, cfg, model, out.path("mv.ckpt"));
    std::cout << "steps: " << report.steps << "  train acc: " << report.final_train_acc
              << "  best val top1: " << report.best_val_top1 << " (epoch "
              << report.best_epoch << ")\n";
    out.finish("train-mv");
    return 0;
  }

  if (tfu->parsed()) {
    const fs::path root = default_data_root(tfu_data);
    const LoadedDataset ds = load_dataset(root, tfu_split);
    const TrainConfig cfg = resolve_train_config(tfu, "fusion", config_file, epochs, lr,
                                                 batch, seed, input_size, max_steps,
                                                 val_interval, segments);
    if (!fs::exists(tfu_mv_ckpt))
      throw ArgError("train-fusion: MV checkpoint not found: " + tfu_mv_ckpt);
    RunOutputs out(tfu_out);
    out.resolved_config = cfg.to_json();
    FusionHead head(ds.manifest.num_classes(), cfg.seed);
    std::cout << "trainable params: " << head.trainable_param_count() << '\n';
    const TrainReport report = train_fusion_head(ds.manifest, ds.clips, tfu_cache,
                                                 tfu_mv_ckpt, cfg, head,
                                                 out.path("fusion.ckpt"));
    std::cout << "steps: " << report.steps << "  train acc: " << report.final_train_acc
              << '\n';
    out.finish("train-fusion");
    return 0;
  }

  if (ev->parsed()) {
    const fs::path root = default_data_root(ev_data);
    const LoadedDataset ds = load_dataset(root, ev_split);
    const ViewProtocol protocol{ev_views, SampleMode::kTestCenter, 1};
    RunOutputs out(ev_out);
    out.resolved_config = {{"model", ev_model},   {"split", ev_split},
                           {"views", ev_views},   {"input_size", ev_input},
                           {"checkpoint", ev_ckpt}, {"average_logits", ev_logit_avg}};

    EvalResult result;
    if (ev_model == "clip") {
      if (ev_cache.empty()) throw ArgError("eval --model clip needs --app-cache");
      auto encoder = make_encoder(ev_encoder);
      const auto library =
          build_text_library(ds.manifest.class_names, default_templates(), *encoder);
      result = summarize(zero_shot_log(ds.manifest, load_app_map(ev_cache), library),
                         ds.manifest.num_classes());
    } else if (ev_model == "mv") {
      if (ev_ckpt.empty()) throw ArgError("eval --model mv needs --checkpoint");
      auto model = load_mv_model(ev_ckpt);
      MvOnlyViewModel view(model->backbone, model->head);
      result = evaluate(ds.manifest, ds.clips, view, nullptr, protocol, ev_input,
                        ev_logit_avg);
    } else if (ev_model == "fusion") {
      if (ev_ckpt.empty()) throw ArgError("eval --model fusion needs --checkpoint");
      if (ev_cache.empty()) throw ArgError("eval --model fusion needs --app-cache");
      const Checkpoint fckpt = load_checkpoint(ev_ckpt);
      std::string mv_path = ev_mv_ckpt;
      if (mv_path.empty())
        mv_path = fckpt.meta.at("references").at("mv_checkpoint").at("path")
                      .get<std::string>();
      auto mv = load_mv_model(mv_path);
      auto head = load_fusion_head(ev_ckpt);
      FusionViewModel view(mv->backbone, *head);
      const auto f_app = load_app_map(ev_cache);
      result = evaluate(ds.manifest, ds.clips, view, &f_app, protocol, ev_input,
                        ev_logit_avg);
    } else {
      throw ArgError("eval: unknown --model '" + ev_model + "' (clip | mv | fusion)");
    }

    write_prediction_log(result.log, out.path("predictions.txt"));
    {
      std::ofstream pc(out.path("per_class.csv"));
      pc << "class_id,class_name,accuracy\n";
      for (int c = 0; c < ds.manifest.num_classes(); ++c) {
        const auto it = result.per_class.find(c);
        pc << c << ',' << ds.manifest.class_names[size_t(c)] << ','
           << (it == result.per_class.end() ? -1.0 : it->second) << '\n';
      }
    }
    {
      std::ofstream sj(out.path("summary.json"));
      sj << json{{"model", ev_model}, {"top1", result.top1},
                 {"n_videos", result.log.size()}}
                .dump(2)
         << '\n';
    }
    out.finish("eval");
    std::cout << "top1: " << result.top1 << " over " << result.log.size() << " videos\n";
    return 0;
  }

  if (fl->parsed()) {
    const flops::FlopOptions opts{fl_mac, !fl_no_fold};
    std::vector<flops::CostTableRow> rows;
    if (!fl_ledger.empty()) {
      const auto ledger = flops::load_ledger(fl_ledger);
      rows.push_back({"custom ledger", flops::flops_total(ledger)});
    } else {
      rows = flops::builtin_cost_table(opts);
    }
    const std::string table = flops::format_cost_table(rows, opts);
    std::cout << table;
    if (!fl_out.empty()) {
      RunOutputs out(fl_out);
      out.resolved_config = {{"mac_flops", fl_mac}, {"fold_norm", !fl_no_fold},
                             {"ledger", fl_ledger}};
      std::ofstream tf(out.path("cost_table.txt"));
      tf << table;
      out.finish("flops");
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ArgError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
