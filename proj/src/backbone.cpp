#include "mvfuse/backbone.hpp"

#include <cmath>

namespace mvfuse {

using namespace nn;

MBConv::MBConv(const std::string& name, int in_ch, const BlockSpec& spec, int stride) {
  const int mid = in_ch * spec.expand;
  skip_ = (stride == 1 && in_ch == spec.out_ch);
  if (spec.expand != 1) {
    path_.add(std::make_unique<Conv1x1>(name + ".expand", in_ch, mid));
    path_.add(std::make_unique<BatchNorm2d>(name + ".expand_bn", mid));
    path_.add(std::make_unique<SiLU>());
  }
  path_.add(std::make_unique<DepthwiseConv>(name + ".dw", mid, spec.kernel, stride));
  path_.add(std::make_unique<BatchNorm2d>(name + ".dw_bn", mid));
  path_.add(std::make_unique<SiLU>());
  const int squeezed = std::max(1, in_ch / 4);
  path_.add(std::make_unique<SqueezeExcite>(name + ".se", mid, squeezed));
  path_.add(std::make_unique<Conv1x1>(name + ".project", mid, spec.out_ch));
  path_.add(std::make_unique<BatchNorm2d>(name + ".project_bn", spec.out_ch));
}

void MBConv::init_weights(Rng& rng) { path_.init_weights(rng); }

Tensor MBConv::forward(const Tensor& x, bool train) {
  Tensor y = path_.forward(x, train);
  if (skip_) y.data += x.data;
  return y;
}

Tensor MBConv::backward(const Tensor& gy) {
  Tensor gx = path_.backward(gy);
  if (skip_) gx.data += gy.data;
  return gx;
}

Eigen::VectorXf adapt_stem(const Eigen::VectorXf& weights3, int out_ch, int kernel) {
  const int64_t rc = int64_t(kernel) * kernel;
  if (weights3.size() != int64_t(out_ch) * 3 * rc)
    throw ArgError("adapt_stem: expected a Kx3xkxk weight tensor");
  Eigen::VectorXf out(int64_t(out_ch) * 2 * rc);
  for (int k = 0; k < out_ch; ++k) {
    for (int64_t i = 0; i < rc; ++i) {
      const float mean = (weights3[(int64_t(k) * 3 + 0) * rc + i] +
                          weights3[(int64_t(k) * 3 + 1) * rc + i] +
                          weights3[(int64_t(k) * 3 + 2) * rc + i]) /
                         3.0f;
      const float v = mean * 1.5f;  // 3/2 keeps the channel-constant response equal
      out[(int64_t(k) * 2 + 0) * rc + i] = v;
      out[(int64_t(k) * 2 + 1) * rc + i] = v;
    }
  }
  return out;
}

MotionBackbone::MotionBackbone(uint64_t seed, int in_channels) : in_channels_(in_channels) {
  net_.add(std::make_unique<BatchNorm2d>("input_bn", in_channels));
  net_.add(std::make_unique<Conv2d>("stem", in_channels, kStemChannels, 3, 2));
  net_.add(std::make_unique<BatchNorm2d>("stem_bn", kStemChannels));
  net_.add(std::make_unique<SiLU>());
  int ch = kStemChannels;
  int idx = 0;
  for (const auto& spec : kEffNetB0Blocks) {
    for (int r = 0; r < spec.repeats; ++r) {
      const int stride = (r == 0) ? spec.stride : 1;
      net_.add(std::make_unique<MBConv>("block" + std::to_string(idx++), ch, spec, stride));
      ch = spec.out_ch;
    }
  }
  net_.add(std::make_unique<Conv1x1>("head", ch, kHeadChannels));
  net_.add(std::make_unique<BatchNorm2d>("head_bn", kHeadChannels));
  net_.add(std::make_unique<SiLU>());
  net_.add(std::make_unique<GlobalAvgPool>());

  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  net_.init_weights(rng);
}

Eigen::MatrixXf MotionBackbone::forward_features(const Tensor& x, bool train) {
  if (x.c != in_channels_) throw ArgError("backbone: wrong input channel count");
  Tensor y = net_.forward(x, train);
  Eigen::MatrixXf feat = MatMap(y.ptr(), y.n, feature_dim());
  return feat;
}

void MotionBackbone::backward_features(const Eigen::MatrixXf& grad_features) {
  Tensor g(int(grad_features.rows()), feature_dim(), 1, 1);
  MatMap(g.ptr(), g.n, feature_dim()) = grad_features;
  net_.backward(g);
}

std::vector<nn::Param*> MotionBackbone::params() {
  std::vector<Param*> ps;
  net_.collect(ps);
  return ps;
}

int64_t MotionBackbone::trainable_param_count() {
  auto ps = params();
  return count_trainable_params(ps);
}

uint64_t MotionBackbone::checksum() {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : params()) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data(), size_t(p->value.size()) * 4, h);
  }
  return h;
}

void MotionBackbone::load_pretrained_stem(const Eigen::VectorXf& weights3) {
  auto adapted = adapt_stem(weights3, kStemChannels, 3);
  for (auto& layer : net_.layers_) {
    if (auto* c = dynamic_cast<Conv2d*>(layer.get())) {
      if (c->weight_.value.size() != adapted.size())
        throw ArgError("load_pretrained_stem: stem shape mismatch");
      c->weight_.value = adapted;
      return;
    }
  }
  throw Error("load_pretrained_stem: no stem conv found");
}

}  // namespace mvfuse
