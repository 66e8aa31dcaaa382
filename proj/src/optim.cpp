#include "mvfuse/optim.hpp"

#include <cmath>

namespace mvfuse {
namespace nn {

Adam::Adam(std::vector<Param*> params, Options opt) : opt_(opt) {
  for (auto* p : params) {
    if (!p->trainable) continue;
    params_.push_back(p);
    m_.push_back(Eigen::VectorXf::Zero(p->value.size()));
    v_.push_back(Eigen::VectorXf::Zero(p->value.size()));
  }
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(opt_.beta1, float(t_));
  const float bc2 = 1.0f - std::pow(opt_.beta2, float(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    Eigen::VectorXf g = p->grad;
    if (opt_.weight_decay > 0.0f && !opt_.decoupled) g += opt_.weight_decay * p->value;
    m_[i] = opt_.beta1 * m_[i] + (1.0f - opt_.beta1) * g;
    v_[i].array() = opt_.beta2 * v_[i].array() + (1.0f - opt_.beta2) * g.array().square();
    const auto mhat = (m_[i] / bc1).eval();
    const auto vhat = (v_[i] / bc2).eval();
    if (opt_.weight_decay > 0.0f && opt_.decoupled)
      p->value -= opt_.lr * opt_.weight_decay * p->value;
    p->value.array() -= opt_.lr * mhat.array() / (vhat.array().sqrt() + opt_.eps);
  }
}

}  // namespace nn
}  // namespace mvfuse
