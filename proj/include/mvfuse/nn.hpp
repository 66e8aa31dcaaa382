#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "mvfuse/tensor.hpp"

namespace mvfuse {
namespace nn {

// Named parameter or buffer. Buffers (running statistics) are
// trainable=false: serialized and checksummed like parameters, ignored by
// the optimizer.
struct Param {
  std::string name;
  Eigen::VectorXf value;
  Eigen::VectorXf grad;
  bool trainable = true;

  void init(const std::string& n, int64_t size, bool train = true) {
    name = n;
    value = Eigen::VectorXf::Zero(size);
    grad = Eigen::VectorXf::Zero(size);
    trainable = train;
  }
};

class Layer {
 public:
  virtual ~Layer() = default;
  // forward(train=true) caches what backward needs
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual void collect(std::vector<Param*>& out) {}
  // default random initialization; layers without weights ignore it
  virtual void init_weights(Rng& rng) {}
};

// 1x1 convolution, stride 1, no bias (BN follows everywhere it is used).
class Conv1x1 : public Layer {
 public:
  Conv1x1(const std::string& name, int in_ch, int out_ch);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override { out.push_back(&weight_); }
  void init_weights(Rng& rng) override;

  int in_ch_, out_ch_;
  Param weight_;  // (out_ch, in_ch) row-major

 private:
  Tensor x_;
};

// Dense KxK convolution with "same" padding, no bias. im2col + GEMM.
class Conv2d : public Layer {
 public:
  Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override { out.push_back(&weight_); }
  void init_weights(Rng& rng) override;

  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Param weight_;  // (out_ch, in_ch*k*k) row-major

 private:
  Tensor x_;
  RowMat im2col(const Tensor& x, int s, int out_h, int out_w) const;
};

// Depthwise KxK convolution with "same" padding, no bias.
class DepthwiseConv : public Layer {
 public:
  DepthwiseConv(const std::string& name, int channels, int kernel, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override { out.push_back(&weight_); }
  void init_weights(Rng& rng) override;

  int channels_, kernel_, stride_, pad_;
  Param weight_;  // (channels, k*k)

 private:
  Tensor x_;
};

class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(const std::string& name, int channels, float momentum = 0.1f,
              float eps = 1e-5f);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override;

  int channels_;
  float momentum_, eps_;
  Param gamma_, beta_;
  Param running_mean_, running_var_;  // buffers

 private:
  Tensor xhat_;
  Eigen::VectorXf invstd_;
};

class SiLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;

 private:
  Tensor x_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;

 private:
  Tensor mask_;
};

// Squeeze-and-excitation: global average pool -> fc reduce -> SiLU ->
// fc expand -> sigmoid -> channel-wise rescale of the input.
class SqueezeExcite : public Layer {
 public:
  SqueezeExcite(const std::string& name, int channels, int squeezed);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override;
  void init_weights(Rng& rng) override;

  int channels_, squeezed_;
  Param w1_, b1_, w2_, b2_;

 private:
  Tensor x_;
  RowMat s_, z1pre_, z1_, gate_;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;

 private:
  int h_ = 0, w_ = 0, c_ = 0;
};

// Fully connected layer on (N, D) tensors (h = w = 1).
class Linear : public Layer {
 public:
  Linear(const std::string& name, int in_dim, int out_dim);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  void init_weights(Rng& rng) override;

  Eigen::MatrixXf forward_mat(const Eigen::MatrixXf& x, bool train);
  Eigen::MatrixXf backward_mat(const Eigen::MatrixXf& gy);

  int in_dim_, out_dim_;
  Param weight_;  // (out, in) row-major
  Param bias_;    // (out)

 private:
  Eigen::MatrixXf x_;
};

// Inverted dropout; eval mode is the identity.
class Dropout : public Layer {
 public:
  Dropout(float rate, uint64_t seed);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void reseed(uint64_t seed) { rng_ = Rng(seed); }

  float rate_;

 private:
  Rng rng_;
  Eigen::VectorXf mask_;
};

class Sequential : public Layer {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect(std::vector<Param*>& out) override;
  void init_weights(Rng& rng) override;

  std::vector<std::unique_ptr<Layer>> layers_;
};

// Softmax cross-entropy, mean over the batch. Templated so tests can run
// the same math in double against finite differences.
template <typename Derived>
double softmax_cross_entropy(const Eigen::MatrixBase<Derived>& logits,
                             const std::vector<int>& labels,
                             Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic,
                                           Eigen::Dynamic>* grad) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = logits.rows();
  Mat probs = logits;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mx = probs.row(i).maxCoeff();
    probs.row(i) = (probs.row(i).array() - mx).exp();
    const Scalar z = probs.row(i).sum();
    probs.row(i) /= z;
    loss -= std::log(double(probs(i, labels[size_t(i)])));
  }
  loss /= double(n);
  if (grad) {
    *grad = probs;
    for (Eigen::Index i = 0; i < n; ++i) (*grad)(i, labels[size_t(i)]) -= Scalar(1);
    *grad /= Scalar(n);
  }
  return loss;
}

// Row-wise softmax.
Eigen::VectorXf softmax(const Eigen::VectorXf& logits);

int64_t count_trainable_params(const std::vector<Param*>& params);
void zero_grads(std::vector<Param*>& params);

// Initializers
void kaiming_normal(Param& p, int fan_in, Rng& rng);

}  // namespace nn
}  // namespace mvfuse
