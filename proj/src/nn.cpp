#include "mvfuse/nn.hpp"

#include <cmath>

namespace mvfuse {
namespace nn {

namespace {

inline int out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------- Conv1x1

Conv1x1::Conv1x1(const std::string& name, int in_ch, int out_ch)
    : in_ch_(in_ch), out_ch_(out_ch) {
  weight_.init(name + ".weight", int64_t(out_ch) * in_ch);
}

Tensor Conv1x1::forward(const Tensor& x, bool train) {
  if (x.c != in_ch_) throw ArgError("Conv1x1: channel mismatch");
  if (train) x_ = x;
  Tensor y(x.n, out_ch_, x.h, x.w);
  ConstMatMap w(weight_.value.data(), out_ch_, in_ch_);
  for (int s = 0; s < x.n; ++s) y.sample(s).noalias() = w * x.sample(s);
  return y;
}

Tensor Conv1x1::backward(const Tensor& gy) {
  ConstMatMap w(weight_.value.data(), out_ch_, in_ch_);
  MatMap gw(weight_.grad.data(), out_ch_, in_ch_);
  Tensor gx(x_.n, in_ch_, x_.h, x_.w);
  for (int s = 0; s < x_.n; ++s) {
    gw.noalias() += gy.sample(s) * x_.sample(s).transpose();
    gx.sample(s).noalias() = w.transpose() * gy.sample(s);
  }
  return gx;
}

// ----------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(kernel / 2) {
  weight_.init(name + ".weight", int64_t(out_ch) * in_ch * kernel * kernel);
}

RowMat Conv2d::im2col(const Tensor& x, int s, int out_h, int out_w) const {
  RowMat col(int64_t(in_ch_) * kernel_ * kernel_, int64_t(out_h) * out_w);
  col.setZero();
  for (int c = 0; c < in_ch_; ++c) {
    for (int kr = 0; kr < kernel_; ++kr) {
      for (int kc = 0; kc < kernel_; ++kc) {
        const int row = (c * kernel_ + kr) * kernel_ + kc;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride_ - pad_ + kr;
          if (ih < 0 || ih >= x.h) continue;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride_ - pad_ + kc;
            if (iw < 0 || iw >= x.w) continue;
            col(row, oh * out_w + ow) = x.at(s, c, ih, iw);
          }
        }
      }
    }
  }
  return col;
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.c != in_ch_) throw ArgError("Conv2d: channel mismatch");
  if (train) x_ = x;
  const int oh = out_dim(x.h, kernel_, stride_, pad_);
  const int ow = out_dim(x.w, kernel_, stride_, pad_);
  Tensor y(x.n, out_ch_, oh, ow);
  ConstMatMap w(weight_.value.data(), out_ch_, int64_t(in_ch_) * kernel_ * kernel_);
  for (int s = 0; s < x.n; ++s) {
    const RowMat col = im2col(x, s, oh, ow);
    y.sample(s).noalias() = w * col;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const int oh = gy.h, ow = gy.w;
  ConstMatMap w(weight_.value.data(), out_ch_, int64_t(in_ch_) * kernel_ * kernel_);
  MatMap gw(weight_.grad.data(), out_ch_, int64_t(in_ch_) * kernel_ * kernel_);
  Tensor gx(x_.n, in_ch_, x_.h, x_.w);
  for (int s = 0; s < x_.n; ++s) {
    const RowMat col = im2col(x_, s, oh, ow);
    gw.noalias() += gy.sample(s) * col.transpose();
    const RowMat gcol = w.transpose() * gy.sample(s);
    // col2im scatter-add
    for (int c = 0; c < in_ch_; ++c) {
      for (int kr = 0; kr < kernel_; ++kr) {
        for (int kc = 0; kc < kernel_; ++kc) {
          const int row = (c * kernel_ + kr) * kernel_ + kc;
          for (int ohh = 0; ohh < oh; ++ohh) {
            const int ih = ohh * stride_ - pad_ + kr;
            if (ih < 0 || ih >= x_.h) continue;
            for (int oww = 0; oww < ow; ++oww) {
              const int iw = oww * stride_ - pad_ + kc;
              if (iw < 0 || iw >= x_.w) continue;
              gx.at(s, c, ih, iw) += gcol(row, ohh * ow + oww);
            }
          }
        }
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------- DepthwiseConv

DepthwiseConv::DepthwiseConv(const std::string& name, int channels, int kernel, int stride)
    : channels_(channels), kernel_(kernel), stride_(stride), pad_(kernel / 2) {
  weight_.init(name + ".weight", int64_t(channels) * kernel * kernel);
}

Tensor DepthwiseConv::forward(const Tensor& x, bool train) {
  if (x.c != channels_) throw ArgError("DepthwiseConv: channel mismatch");
  if (train) x_ = x;
  const int oh = out_dim(x.h, kernel_, stride_, pad_);
  const int ow = out_dim(x.w, kernel_, stride_, pad_);
  Tensor y(x.n, channels_, oh, ow);
  for (int s = 0; s < x.n; ++s) {
    for (int c = 0; c < channels_; ++c) {
      const float* wk = weight_.value.data() + int64_t(c) * kernel_ * kernel_;
      for (int ohh = 0; ohh < oh; ++ohh) {
        for (int oww = 0; oww < ow; ++oww) {
          float acc = 0.0f;
          const int ih0 = ohh * stride_ - pad_;
          const int iw0 = oww * stride_ - pad_;
          for (int kr = 0; kr < kernel_; ++kr) {
            const int ih = ih0 + kr;
            if (ih < 0 || ih >= x.h) continue;
            for (int kc = 0; kc < kernel_; ++kc) {
              const int iw = iw0 + kc;
              if (iw < 0 || iw >= x.w) continue;
              acc += wk[kr * kernel_ + kc] * x.at(s, c, ih, iw);
            }
          }
          y.at(s, c, ohh, oww) = acc;
        }
      }
    }
  }
  return y;
}

Tensor DepthwiseConv::backward(const Tensor& gy) {
  Tensor gx(x_.n, channels_, x_.h, x_.w);
  for (int s = 0; s < x_.n; ++s) {
    for (int c = 0; c < channels_; ++c) {
      const float* wk = weight_.value.data() + int64_t(c) * kernel_ * kernel_;
      float* gwk = weight_.grad.data() + int64_t(c) * kernel_ * kernel_;
      for (int ohh = 0; ohh < gy.h; ++ohh) {
        for (int oww = 0; oww < gy.w; ++oww) {
          const float g = gy.at(s, c, ohh, oww);
          const int ih0 = ohh * stride_ - pad_;
          const int iw0 = oww * stride_ - pad_;
          for (int kr = 0; kr < kernel_; ++kr) {
            const int ih = ih0 + kr;
            if (ih < 0 || ih >= x_.h) continue;
            for (int kc = 0; kc < kernel_; ++kc) {
              const int iw = iw0 + kc;
              if (iw < 0 || iw >= x_.w) continue;
              gwk[kr * kernel_ + kc] += g * x_.at(s, c, ih, iw);
              gx.at(s, c, ih, iw) += g * wk[kr * kernel_ + kc];
            }
          }
        }
      }
    }
  }
  return gx;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, float momentum, float eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_.init(name + ".gamma", channels);
  gamma_.value.setOnes();
  beta_.init(name + ".beta", channels);
  running_mean_.init(name + ".running_mean", channels, false);
  running_var_.init(name + ".running_var", channels, false);
  running_var_.value.setOnes();
}

void BatchNorm2d::collect(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.c != channels_) throw ArgError("BatchNorm2d: channel mismatch");
  const int64_t m = int64_t(x.n) * x.spatial();
  Tensor y(x.n, x.c, x.h, x.w);
  if (!train) {
    for (int c = 0; c < channels_; ++c) {
      const float inv = 1.0f / std::sqrt(running_var_.value[c] + eps_);
      const float a = gamma_.value[c] * inv;
      const float b = beta_.value[c] - a * running_mean_.value[c];
      for (int s = 0; s < x.n; ++s)
        y.sample(s).row(c) = a * x.sample(s).row(c).array() + b;
    }
    invstd_.resize(0);
    return y;
  }

  Eigen::VectorXf mean = Eigen::VectorXf::Zero(channels_);
  Eigen::VectorXf var = Eigen::VectorXf::Zero(channels_);
  for (int s = 0; s < x.n; ++s) mean += x.sample(s).rowwise().sum();
  mean /= float(m);
  for (int s = 0; s < x.n; ++s)
    var += (x.sample(s).colwise() - mean).array().square().matrix().rowwise().sum();
  var /= float(m);  // biased, used for normalization

  invstd_ = (var.array() + eps_).rsqrt();
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  for (int s = 0; s < x.n; ++s) {
    xhat_.sample(s) = (x.sample(s).colwise() - mean).array().colwise() * invstd_.array();
    y.sample(s) = (xhat_.sample(s).array().colwise() * gamma_.value.array()).colwise() +
                  beta_.value.array();
  }

  // running stats track the unbiased variance
  const float unbias = m > 1 ? float(m) / float(m - 1) : 1.0f;
  running_mean_.value = (1.0f - momentum_) * running_mean_.value + momentum_ * mean;
  running_var_.value = (1.0f - momentum_) * running_var_.value + momentum_ * (unbias * var);
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
  if (invstd_.size() == 0) {
    // eval-mode backward: plain affine
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
    for (int c = 0; c < channels_; ++c) {
      const float a = gamma_.value[c] / std::sqrt(running_var_.value[c] + eps_);
      for (int s = 0; s < gy.n; ++s) gx.sample(s).row(c) = a * gy.sample(s).row(c);
    }
    return gx;
  }
  const int64_t m = int64_t(gy.n) * gy.spatial();
  Eigen::VectorXf sum_gy = Eigen::VectorXf::Zero(channels_);
  Eigen::VectorXf sum_gy_xhat = Eigen::VectorXf::Zero(channels_);
  for (int s = 0; s < gy.n; ++s) {
    sum_gy += gy.sample(s).rowwise().sum();
    sum_gy_xhat += (gy.sample(s).array() * xhat_.sample(s).array()).matrix().rowwise().sum();
  }
  gamma_.grad += sum_gy_xhat;
  beta_.grad += sum_gy;

  Tensor gx(gy.n, gy.c, gy.h, gy.w);
  const Eigen::ArrayXf a = gamma_.value.array() * invstd_.array();
  const Eigen::ArrayXf mean_gy = sum_gy.array() / float(m);
  const Eigen::ArrayXf mean_gy_xhat = sum_gy_xhat.array() / float(m);
  for (int s = 0; s < gy.n; ++s) {
    gx.sample(s) = ((gy.sample(s).array().colwise() - mean_gy) -
                    (xhat_.sample(s).array().colwise() * mean_gy_xhat))
                       .colwise() *
                   a;
  }
  return gx;
}

// ------------------------------------------------------------ activations

Tensor SiLU::forward(const Tensor& x, bool train) {
  if (train) x_ = x;
  Tensor y = x;
  y.data = x.data.array() / (1.0f + (-x.data.array()).exp());
  return y;
}

Tensor SiLU::backward(const Tensor& gy) {
  Tensor gx = gy;
  const auto sig = (1.0f / (1.0f + (-x_.data.array()).exp())).eval();
  gx.data = gy.data.array() * sig * (1.0f + x_.data.array() * (1.0f - sig));
  return gx;
}

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor y = x;
  y.data = x.data.cwiseMax(0.0f);
  if (train) {
    mask_ = x;
    mask_.data = (x.data.array() > 0.0f).cast<float>();
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  Tensor gx = gy;
  gx.data = gy.data.array() * mask_.data.array();
  return gx;
}

// ---------------------------------------------------------- SqueezeExcite

SqueezeExcite::SqueezeExcite(const std::string& name, int channels, int squeezed)
    : channels_(channels), squeezed_(squeezed) {
  w1_.init(name + ".fc1.weight", int64_t(squeezed) * channels);
  b1_.init(name + ".fc1.bias", squeezed);
  w2_.init(name + ".fc2.weight", int64_t(channels) * squeezed);
  b2_.init(name + ".fc2.bias", channels);
}

void SqueezeExcite::collect(std::vector<Param*>& out) {
  out.push_back(&w1_);
  out.push_back(&b1_);
  out.push_back(&w2_);
  out.push_back(&b2_);
}

Tensor SqueezeExcite::forward(const Tensor& x, bool train) {
  const float inv_hw = 1.0f / float(x.spatial());
  RowMat s(x.n, channels_);
  for (int i = 0; i < x.n; ++i) s.row(i) = x.sample(i).rowwise().sum().transpose() * inv_hw;

  ConstMatMap w1(w1_.value.data(), squeezed_, channels_);
  ConstMatMap w2(w2_.value.data(), channels_, squeezed_);
  RowMat z1pre = (s * w1.transpose()).rowwise() + b1_.value.transpose();
  RowMat z1 = z1pre.array() / (1.0f + (-z1pre.array()).exp());
  RowMat z2pre = (z1 * w2.transpose()).rowwise() + b2_.value.transpose();
  RowMat gate = 1.0f / (1.0f + (-z2pre.array()).exp());

  Tensor y(x.n, x.c, x.h, x.w);
  for (int i = 0; i < x.n; ++i)
    y.sample(i) = x.sample(i).array().colwise() * gate.row(i).transpose().array();

  if (train) {
    x_ = x;
    s_ = std::move(s);
    z1pre_ = std::move(z1pre);
    z1_ = std::move(z1);
    gate_ = std::move(gate);
  }
  return y;
}

Tensor SqueezeExcite::backward(const Tensor& gy) {
  const float inv_hw = 1.0f / float(x_.spatial());
  ConstMatMap w1(w1_.value.data(), squeezed_, channels_);
  ConstMatMap w2(w2_.value.data(), channels_, squeezed_);
  MatMap gw1(w1_.grad.data(), squeezed_, channels_);
  MatMap gw2(w2_.grad.data(), channels_, squeezed_);

  Tensor gx(x_.n, x_.c, x_.h, x_.w);
  RowMat ggate(x_.n, channels_);
  for (int i = 0; i < x_.n; ++i) {
    // direct path: y = x * gate
    gx.sample(i) = gy.sample(i).array().colwise() * gate_.row(i).transpose().array();
    ggate.row(i) =
        (gy.sample(i).array() * x_.sample(i).array()).matrix().rowwise().sum().transpose();
  }
  // through the sigmoid
  RowMat gz2pre = ggate.array() * gate_.array() * (1.0f - gate_.array());
  gw2.noalias() += gz2pre.transpose() * z1_;
  b2_.grad += gz2pre.colwise().sum().transpose();
  RowMat gz1 = gz2pre * w2;
  // through the SiLU
  RowMat sig1 = 1.0f / (1.0f + (-z1pre_.array()).exp());
  RowMat gz1pre = gz1.array() * sig1.array() * (1.0f + z1pre_.array() * (1.0f - sig1.array()));
  gw1.noalias() += gz1pre.transpose() * s_;
  b1_.grad += gz1pre.colwise().sum().transpose();
  RowMat gs = gz1pre * w1;
  // pooled-path gradient spreads uniformly over the spatial extent
  for (int i = 0; i < x_.n; ++i)
    gx.sample(i).colwise() += (gs.row(i).transpose() * inv_hw).eval();
  return gx;
}

// ---------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool train) {
  h_ = x.h;
  w_ = x.w;
  c_ = x.c;
  Tensor y(x.n, x.c, 1, 1);
  const float inv = 1.0f / float(x.spatial());
  for (int s = 0; s < x.n; ++s)
    y.sample(s) = x.sample(s).rowwise().sum() * inv;
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
  Tensor gx(gy.n, c_, h_, w_);
  const float inv = 1.0f / float(h_ * w_);
  for (int s = 0; s < gy.n; ++s)
    gx.sample(s).colwise() = (gy.sample(s).col(0) * inv).eval();
  return gx;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_dim, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
  weight_.init(name + ".weight", int64_t(out_dim) * in_dim);
  bias_.init(name + ".bias", out_dim);
}

Eigen::MatrixXf Linear::forward_mat(const Eigen::MatrixXf& x, bool train) {
  if (x.cols() != in_dim_) throw ArgError("Linear: dim mismatch");
  if (train) x_ = x;
  ConstMatMap w(weight_.value.data(), out_dim_, in_dim_);
  Eigen::MatrixXf y = x * w.transpose();
  y.rowwise() += bias_.value.transpose();
  return y;
}

Eigen::MatrixXf Linear::backward_mat(const Eigen::MatrixXf& gy) {
  ConstMatMap w(weight_.value.data(), out_dim_, in_dim_);
  MatMap gw(weight_.grad.data(), out_dim_, in_dim_);
  gw.noalias() += (gy.transpose() * x_);
  bias_.grad += gy.colwise().sum().transpose();
  return gy * w;
}

Tensor Linear::forward(const Tensor& x, bool train) {
  Eigen::MatrixXf xm = x.rows();
  Eigen::MatrixXf y = forward_mat(xm, train);
  Tensor out(x.n, out_dim_, 1, 1);
  MatMap(out.ptr(), x.n, out_dim_) = y;
  return out;
}

Tensor Linear::backward(const Tensor& gy) {
  Eigen::MatrixXf gym = gy.rows();
  Eigen::MatrixXf gx = backward_mat(gym);
  Tensor out(gy.n, in_dim_, 1, 1);
  MatMap(out.ptr(), gy.n, in_dim_) = gx;
  return out;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(float rate, uint64_t seed) : rate_(rate), rng_(seed) {}

Tensor Dropout::forward(const Tensor& x, bool train) {
  if (!train || rate_ <= 0.0f) {
    mask_.resize(0);
    return x;
  }
  const float keep = 1.0f - rate_;
  mask_.resize(x.numel());
  for (int64_t i = 0; i < x.numel(); ++i)
    mask_[i] = rng_.next_float() < rate_ ? 0.0f : 1.0f / keep;
  Tensor y = x;
  y.data = x.data.array() * mask_.array();
  return y;
}

Tensor Dropout::backward(const Tensor& gy) {
  if (mask_.size() == 0) return gy;
  Tensor gx = gy;
  gx.data = gy.data.array() * mask_.array();
  return gx;
}

// ------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& gy) {
  Tensor cur = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect(std::vector<Param*>& out) {
  for (auto& l : layers_) l->collect(out);
}

// ----------------------------------------------------------------- inits

void Conv1x1::init_weights(Rng& rng) {
  const float std = std::sqrt(2.0f / float(out_ch_));  // kaiming fan-out
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * rng.next_normal();
}

void Conv2d::init_weights(Rng& rng) {
  const float std = std::sqrt(2.0f / float(out_ch_ * kernel_ * kernel_));
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * rng.next_normal();
}

void DepthwiseConv::init_weights(Rng& rng) {
  const float std = std::sqrt(2.0f / float(kernel_ * kernel_));
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * rng.next_normal();
}

void SqueezeExcite::init_weights(Rng& rng) {
  const float s1 = std::sqrt(1.0f / float(channels_));
  const float s2 = std::sqrt(1.0f / float(squeezed_));
  for (Eigen::Index i = 0; i < w1_.value.size(); ++i) w1_.value[i] = s1 * rng.next_normal();
  for (Eigen::Index i = 0; i < w2_.value.size(); ++i) w2_.value[i] = s2 * rng.next_normal();
  b1_.value.setZero();
  b2_.value.setZero();
}

void Linear::init_weights(Rng& rng) {
  const float std = std::sqrt(1.0f / float(in_dim_));
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i)
    weight_.value[i] = std * rng.next_normal();
  bias_.value.setZero();
}

void Sequential::init_weights(Rng& rng) {
  for (auto& l : layers_) l->init_weights(rng);
}

// ------------------------------------------------------------------ misc

Eigen::VectorXf softmax(const Eigen::VectorXf& logits) {
  Eigen::VectorXf p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

int64_t count_trainable_params(const std::vector<Param*>& params) {
  int64_t n = 0;
  for (const auto* p : params)
    if (p->trainable) n += p->value.size();
  return n;
}

void zero_grads(std::vector<Param*>& params) {
  for (auto* p : params) p->grad.setZero();
}

void kaiming_normal(Param& p, int fan_in, Rng& rng) {
  const float std = std::sqrt(2.0f / float(fan_in));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value[i] = std * rng.next_normal();
}

}  // namespace nn
}  // namespace mvfuse
