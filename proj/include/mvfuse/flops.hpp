#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "mvfuse/common.hpp"

namespace mvfuse {
namespace flops {

// Counting policy. The ledger default treats one multiply-accumulate as a
// single FLOP and folds inference-time batch-norm into the preceding
// convolution — the convention under which the published per-view costs of
// the reference models (ViT-B/32 ~4.4 G, EfficientNet-B0 ~0.39 G at 224^2)
// come out right. flops_per_mac = 2 counts multiply and add separately.
// Elementwise ops (activations, residual adds, pooling, gating) cost 1
// FLOP per element; a normalization that cannot be folded costs 2.
struct FlopOptions {
  int flops_per_mac = 1;
  bool fold_inference_norm = true;
};

// --- layer descriptors -------------------------------------------------
// Spatial (NCHW) descriptors; the counter tracks channels and spatial dims.
struct Conv {
  int out_ch, kernel, stride;
  int groups = 1;
  int pad = -1;  // -1 = "same" (kernel/2)
};
struct Norm {
  bool foldable = true;  // false when not preceded by a conv/linear
};
struct Act {};
struct Pool {
  bool global = true;
};
struct Add {};  // residual
struct SqueezeExciteOp {
  int squeezed;
};
struct LinearOp {
  int in_dim, out_dim;
  bool bias = true;
};
// Token-space descriptors (transformer blocks); explicit shapes.
struct TokenNorm {
  int tokens, width;
};
struct TokenAct {
  int tokens, width;
};
struct TokenAdd {
  int tokens, width;
};
struct TokenLinear {
  int tokens, in_dim, out_dim;
  bool bias = true;
};
struct SelfAttention {
  int tokens, width, heads;
};
struct Unsupported {
  std::string kind;
};

using LayerDesc = std::variant<Conv, Norm, Act, Pool, Add, SqueezeExciteOp, LinearOp,
                               TokenNorm, TokenAct, TokenAdd, TokenLinear, SelfAttention,
                               Unsupported>;

struct ModelDesc {
  std::string name;
  int in_ch = 0, in_h = 0, in_w = 0;
  std::vector<LayerDesc> layers;
};

// Throws on an Unsupported layer; never silently undercounts.
double count_model_gflops(const ModelDesc& model, const FlopOptions& opts = {});

ModelDesc describe_efficientnet_b0(int in_channels);
ModelDesc describe_vit_b32();
ModelDesc describe_fusion_head(int n_classes);

// --- view-protocol ledger ----------------------------------------------
struct FlopsLedger {
  struct Branch {
    std::string name;
    double per_view_gflops = 0.0;
    int n_temporal_views = 1;
    int n_spatial_crops = 1;
  };
  std::vector<Branch> branches;
  double head_gflops = 0.0;
};

// sum over branches of per_view * temporal * spatial, plus the head
double flops_total(const FlopsLedger& ledger);

// JSON: {"branches": [{"name", "per_view_gflops", "n_temporal_views",
// "n_spatial_crops"}], "head_gflops"}
FlopsLedger load_ledger(const std::filesystem::path& path);

struct CostTableRow {
  std::string name;
  double total_gflops = 0.0;
};
// Appearance-only (1 view), MV-only (32 views), fusion (both + MLP head),
// all from first-principles per-view counts.
std::vector<CostTableRow> builtin_cost_table(const FlopOptions& opts = {});
std::string format_cost_table(const std::vector<CostTableRow>& rows,
                              const FlopOptions& opts);

}  // namespace flops
}  // namespace mvfuse
