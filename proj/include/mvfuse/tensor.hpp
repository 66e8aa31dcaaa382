#pragma once

#include <Eigen/Core>

#include "mvfuse/common.hpp"

namespace mvfuse {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Dense NCHW activation tensor.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Eigen::VectorXf data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(Eigen::VectorXf::Zero(int64_t(n_) * c_ * h_ * w_)) {}

  int64_t numel() const { return int64_t(n) * c * h * w; }
  int spatial() const { return h * w; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // sample s viewed as a (C, H*W) row-major matrix
  MatMap sample(int s) { return MatMap(ptr() + int64_t(s) * c * spatial(), c, spatial()); }
  ConstMatMap sample(int s) const {
    return ConstMatMap(ptr() + int64_t(s) * c * spatial(), c, spatial());
  }

  // whole tensor viewed as an (N, C*H*W) row-major matrix
  MatMap rows() { return MatMap(ptr(), n, int64_t(c) * spatial()); }
  ConstMatMap rows() const { return ConstMatMap(ptr(), n, int64_t(c) * spatial()); }

  float& at(int in, int ic, int ih, int iw) {
    return data[((int64_t(in) * c + ic) * h + ih) * w + iw];
  }
  float at(int in, int ic, int ih, int iw) const {
    return data[((int64_t(in) * c + ic) * h + ih) * w + iw];
  }
};

}  // namespace mvfuse
