#include "mvfuse/flops.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mvfuse/backbone.hpp"
#include "mvfuse/feature_cache.hpp"

namespace mvfuse {
namespace flops {

namespace {

struct Counter {
  const FlopOptions& opts;
  int c, h, w;
  double macs = 0.0;
  double elems = 0.0;

  int64_t numel() const { return int64_t(c) * h * w; }

  void apply(const LayerDesc& layer) {
    std::visit([this](const auto& l) { this->visit(l); }, layer);
  }

  void visit(const Conv& l) {
    if (c % l.groups != 0 || l.out_ch % l.groups != 0)
      throw ArgError("flops: conv group count does not divide channels");
    const int pad = l.pad < 0 ? l.kernel / 2 : l.pad;
    const int out_h = (h + 2 * pad - l.kernel) / l.stride + 1;
    const int out_w = (w + 2 * pad - l.kernel) / l.stride + 1;
    macs += double(l.out_ch) * (double(c) / l.groups) * l.kernel * l.kernel * out_h * out_w;
    c = l.out_ch;
    h = out_h;
    w = out_w;
  }
  void visit(const Norm& l) {
    if (!(l.foldable && opts.fold_inference_norm)) elems += 2.0 * double(numel());
  }
  void visit(const Act&) { elems += double(numel()); }
  void visit(const Pool& l) {
    elems += double(numel());
    if (l.global) h = w = 1;
  }
  void visit(const Add&) { elems += double(numel()); }
  void visit(const SqueezeExciteOp& l) {
    elems += double(numel());               // global pool
    macs += double(c) * l.squeezed;         // reduce fc
    elems += double(l.squeezed);            // activation
    macs += double(l.squeezed) * c;         // expand fc
    elems += double(c);                     // sigmoid
    elems += double(numel());               // channel-wise rescale
  }
  void visit(const LinearOp& l) {
    if (int64_t(l.in_dim) != numel())
      throw ArgError("flops: linear input dim " + std::to_string(l.in_dim) +
                     " does not match incoming " + std::to_string(numel()));
    macs += double(l.in_dim) * l.out_dim;
    if (l.bias) elems += double(l.out_dim);
    c = l.out_dim;
    h = w = 1;
  }
  void visit(const TokenNorm& l) { elems += 2.0 * double(l.tokens) * l.width; }
  void visit(const TokenAct& l) { elems += double(l.tokens) * l.width; }
  void visit(const TokenAdd& l) { elems += double(l.tokens) * l.width; }
  void visit(const TokenLinear& l) {
    macs += double(l.tokens) * l.in_dim * l.out_dim;
    if (l.bias) elems += double(l.tokens) * l.out_dim;
  }
  void visit(const SelfAttention& l) {
    const double n = l.tokens, d = l.width;
    macs += 4.0 * n * d * d;      // Q, K, V and output projections
    macs += 2.0 * n * n * d;      // attention scores + weighted sum
    elems += double(l.heads) * n * n;  // softmax
  }
  void visit(const Unsupported& l) {
    throw ArgError("flops: unsupported layer kind '" + l.kind +
                   "' — refusing to undercount");
  }
};

}  // namespace

double count_model_gflops(const ModelDesc& model, const FlopOptions& opts) {
  if (opts.flops_per_mac != 1 && opts.flops_per_mac != 2)
    throw ArgError("flops: flops_per_mac must be 1 or 2");
  Counter counter{opts, model.in_ch, model.in_h, model.in_w};
  for (const auto& layer : model.layers) counter.apply(layer);
  return (counter.macs * opts.flops_per_mac + counter.elems) / 1e9;
}

ModelDesc describe_efficientnet_b0(int in_channels) {
  ModelDesc m{"efficientnet-b0", in_channels, 224, 224, {}};
  // standalone input normalization cannot fold into anything upstream
  m.layers.push_back(Norm{false});
  m.layers.push_back(Conv{kStemChannels, 3, 2});
  m.layers.push_back(Norm{});
  m.layers.push_back(Act{});
  int ch = kStemChannels;
  for (const auto& spec : kEffNetB0Blocks) {
    for (int r = 0; r < spec.repeats; ++r) {
      const int stride = (r == 0) ? spec.stride : 1;
      const int mid = ch * spec.expand;
      const bool skip = (stride == 1 && ch == spec.out_ch);
      if (spec.expand != 1) {
        m.layers.push_back(Conv{mid, 1, 1});
        m.layers.push_back(Norm{});
        m.layers.push_back(Act{});
      }
      m.layers.push_back(Conv{mid, spec.kernel, stride, mid});
      m.layers.push_back(Norm{});
      m.layers.push_back(Act{});
      m.layers.push_back(SqueezeExciteOp{std::max(1, ch / 4)});
      m.layers.push_back(Conv{spec.out_ch, 1, 1});
      m.layers.push_back(Norm{});
      if (skip) m.layers.push_back(Add{});
      ch = spec.out_ch;
    }
  }
  m.layers.push_back(Conv{kHeadChannels, 1, 1});
  m.layers.push_back(Norm{});
  m.layers.push_back(Act{});
  m.layers.push_back(Pool{});
  return m;
}

ModelDesc describe_vit_b32() {
  constexpr int kWidth = 768, kLayers = 12, kHeads = 12, kMlp = 3072;
  constexpr int kTokens = 50;  // 7x7 patches + class token
  ModelDesc m{"vit-b32", 3, 224, 224, {}};
  m.layers.push_back(Conv{kWidth, 32, 32, 1, 0});  // patch embedding, no padding
  m.layers.push_back(TokenNorm{kTokens, kWidth});  // pre-transformer LN
  for (int i = 0; i < kLayers; ++i) {
    m.layers.push_back(TokenNorm{kTokens, kWidth});
    m.layers.push_back(SelfAttention{kTokens, kWidth, kHeads});
    m.layers.push_back(TokenAdd{kTokens, kWidth});
    m.layers.push_back(TokenNorm{kTokens, kWidth});
    m.layers.push_back(TokenLinear{kTokens, kWidth, kMlp});
    m.layers.push_back(TokenAct{kTokens, kMlp});
    m.layers.push_back(TokenLinear{kTokens, kMlp, kWidth});
    m.layers.push_back(TokenAdd{kTokens, kWidth});
  }
  m.layers.push_back(TokenNorm{1, kWidth});  // final LN on the class token
  m.layers.push_back(TokenLinear{1, kWidth, kAppearanceDim, false});  // joint-space projection
  return m;
}

ModelDesc describe_fusion_head(int n_classes) {
  ModelDesc m{"fusion-head", kFusedDim, 1, 1, {}};
  m.layers.push_back(LinearOp{kFusedDim, 512});
  m.layers.push_back(Act{});
  m.layers.push_back(LinearOp{512, n_classes});
  return m;
}

double flops_total(const FlopsLedger& ledger) {
  if (ledger.head_gflops < 0.0) throw ArgError("flops ledger: negative head cost");
  double total = ledger.head_gflops;
  for (const auto& b : ledger.branches) {
    if (b.per_view_gflops < 0.0 || b.n_temporal_views < 1 || b.n_spatial_crops < 1)
      throw ArgError("flops ledger: invalid branch " + b.name);
    total += b.per_view_gflops * b.n_temporal_views * b.n_spatial_crops;
  }
  return total;
}

FlopsLedger load_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ledger file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("bad ledger JSON: ") + e.what());
  }
  FlopsLedger ledger;
  ledger.head_gflops = j.value("head_gflops", 0.0);
  for (const auto& b : j.value("branches", nlohmann::json::array())) {
    FlopsLedger::Branch branch;
    branch.name = b.value("name", "");
    branch.per_view_gflops = b.at("per_view_gflops").get<double>();
    branch.n_temporal_views = b.value("n_temporal_views", 1);
    branch.n_spatial_crops = b.value("n_spatial_crops", 1);
    ledger.branches.push_back(std::move(branch));
  }
  return ledger;
}

std::vector<CostTableRow> builtin_cost_table(const FlopOptions& opts) {
  const double app_view = count_model_gflops(describe_vit_b32(), opts);
  const double mv_view = count_model_gflops(describe_efficientnet_b0(2), opts);
  const double head = count_model_gflops(describe_fusion_head(101), opts);

  FlopsLedger app{{{"appearance", app_view, 1, 1}}, 0.0};
  FlopsLedger mv{{{"motion", mv_view, 32, 1}}, 0.0};
  FlopsLedger fusion{
      {{"appearance", app_view, 1, 1}, {"motion", mv_view, 32, 1}}, head};
  return {{"appearance-only (1 view)", flops_total(app)},
          {"mv-only (32 views)", flops_total(mv)},
          {"fusion (33 views + head)", flops_total(fusion)}};
}

std::string format_cost_table(const std::vector<CostTableRow>& rows,
                              const FlopOptions& opts) {
  std::ostringstream os;
  os << "Inference cost at 224x224, " << opts.flops_per_mac
     << " FLOP(s) per multiply-accumulate, inference norms "
     << (opts.fold_inference_norm ? "folded" : "counted") << "\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-32s %12s\n", "Model", "GFLOPs");
  os << buf << std::string(45, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-32s %12.2f\n", r.name.c_str(), r.total_gflops);
    os << buf;
  }
  return os.str();
}

}  // namespace flops
}  // namespace mvfuse
