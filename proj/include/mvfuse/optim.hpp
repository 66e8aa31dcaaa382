#pragma once

#include <vector>

#include "mvfuse/nn.hpp"

namespace mvfuse {
namespace nn {

// Adam, optionally with decoupled weight decay (AdamW). Classic Adam
// applies weight decay as L2 added to the gradient.
class Adam {
 public:
  struct Options {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
    bool decoupled = false;  // true = AdamW
  };

  Adam(std::vector<Param*> params, Options opt);
  void step();
  void set_lr(float lr) { opt_.lr = lr; }
  float lr() const { return opt_.lr; }

 private:
  std::vector<Param*> params_;
  std::vector<Eigen::VectorXf> m_, v_;
  Options opt_;
  int64_t t_ = 0;
};

}  // namespace nn
}  // namespace mvfuse
