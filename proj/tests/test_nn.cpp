#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mvfuse/backbone.hpp>
#include <mvfuse/nn.hpp>
#include <mvfuse/optim.hpp>

using namespace mvfuse;
using namespace mvfuse::nn;

namespace {

// Scalar loss = sum(y .* probe) so dLoss/dy = probe; checks layer
// gradients against central finite differences.
double probe_loss(Layer& layer, const Tensor& x, const Tensor& probe) {
  Tensor y = const_cast<Layer&>(layer).forward(x, true);
  return double((y.data.array() * probe.data.array()).sum());
}

struct GradCheckResult {
  double max_rel_input = 0.0;
  double max_rel_param = 0.0;
};

GradCheckResult grad_check(Layer& layer, Tensor x, uint64_t seed, float eps = 1e-2f,
                           double tol_scale = 1.0) {
  Rng rng(seed);
  Tensor probe(x.n, 0, 0, 0);
  {
    Tensor y = layer.forward(x, true);
    probe = Tensor(y.n, y.c, y.h, y.w);
    for (int64_t i = 0; i < probe.numel(); ++i) probe.data[i] = rng.next_float() - 0.5f;
  }
  std::vector<Param*> ps;
  layer.collect(ps);
  zero_grads(ps);

  // analytic
  layer.forward(x, true);
  Tensor gx = layer.backward(probe);

  GradCheckResult res;
  // errors are normalized by the largest gradient magnitude in the same
  // tensor; per-coordinate relative error drowns in float rounding noise
  // for near-zero entries
  const double gx_scale = std::max(1e-2, double(gx.data.cwiseAbs().maxCoeff()));
  for (int trial = 0; trial < 24; ++trial) {
    const int64_t i = int64_t(rng.raw() % uint64_t(x.numel()));
    const float orig = x.data[i];
    x.data[i] = orig + eps;
    const double lp = probe_loss(layer, x, probe);
    x.data[i] = orig - eps;
    const double lm = probe_loss(layer, x, probe);
    x.data[i] = orig;
    const double num = (lp - lm) / (2.0 * eps);
    res.max_rel_input = std::max(res.max_rel_input, std::abs(double(gx.data[i]) - num) / gx_scale);
  }
  for (auto* p : ps) {
    if (!p->trainable || p->value.size() == 0) continue;
    const double gscale = std::max(1e-2, double(p->grad.cwiseAbs().maxCoeff()));
    for (int trial = 0; trial < 12; ++trial) {
      const int64_t i = int64_t(rng.raw() % uint64_t(p->value.size()));
      const float orig = p->value[i];
      p->value[i] = orig + eps;
      const double lp = probe_loss(layer, x, probe);
      p->value[i] = orig - eps;
      const double lm = probe_loss(layer, x, probe);
      p->value[i] = orig;
      const double num = (lp - lm) / (2.0 * eps);
      res.max_rel_param =
          std::max(res.max_rel_param, std::abs(double(p->grad[i]) - num) / gscale);
    }
  }
  (void)tol_scale;
  return res;
}

Tensor random_tensor(int n, int c, int h, int w, uint64_t seed, float scale = 1.0f) {
  Tensor t(n, c, h, w);
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = scale * (rng.next_float() - 0.5f);
  return t;
}

}  // namespace

TEST_CASE("conv1x1 gradients match finite differences") {
  Conv1x1 conv("c", 5, 7);
  Rng rng(1);
  conv.init_weights(rng);
  auto r = grad_check(conv, random_tensor(2, 5, 4, 4, 11), 21);
  CHECK(r.max_rel_input < 1e-2);
  CHECK(r.max_rel_param < 1e-2);
}

TEST_CASE("conv2d gradients match finite differences") {
  Conv2d conv("c", 3, 6, 3, 2);
  Rng rng(2);
  conv.init_weights(rng);
  auto r = grad_check(conv, random_tensor(2, 3, 9, 9, 12), 22);
  CHECK(r.max_rel_input < 1e-2);
  CHECK(r.max_rel_param < 1e-2);
}

TEST_CASE("depthwise conv gradients match finite differences") {
  for (int stride : {1, 2}) {
    DepthwiseConv conv("c", 4, 3, stride);
    Rng rng(3);
    conv.init_weights(rng);
    auto r = grad_check(conv, random_tensor(2, 4, 8, 8, 13), 23);
    CHECK(r.max_rel_input < 1e-2);
    CHECK(r.max_rel_param < 1e-2);
  }
}

TEST_CASE("batchnorm train-mode gradients match finite differences") {
  BatchNorm2d bn("bn", 4);
  Tensor x = random_tensor(3, 4, 5, 5, 14, 2.0f);
  auto r = grad_check(bn, x, 24);
  CHECK(r.max_rel_input < 2e-2);
  CHECK(r.max_rel_param < 2e-2);
}

TEST_CASE("batchnorm eval mode uses running stats and is affine") {
  BatchNorm2d bn("bn", 2);
  bn.running_mean_.value << 1.0f, -1.0f;
  bn.running_var_.value << 4.0f, 0.25f;
  bn.gamma_.value << 2.0f, 1.0f;
  bn.beta_.value << 0.5f, 0.0f;
  Tensor x(1, 2, 1, 1);
  x.at(0, 0, 0, 0) = 3.0f;
  x.at(0, 1, 0, 0) = 0.0f;
  Tensor y = bn.forward(x, false);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.0f * (3.0f - 1.0f) / 2.0f + 0.5f).epsilon(1e-4));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(1.0f * (0.0f + 1.0f) / 0.5f).epsilon(1e-4));
}

TEST_CASE("silu and relu gradients") {
  SiLU silu;
  auto r = grad_check(silu, random_tensor(2, 3, 4, 4, 15, 4.0f), 25);
  CHECK(r.max_rel_input < 1e-2);
  ReLU relu;
  auto r2 = grad_check(relu, random_tensor(2, 3, 4, 4, 16, 4.0f), 26);
  CHECK(r2.max_rel_input < 1e-2);
}

TEST_CASE("squeeze-excite gradients match finite differences") {
  SqueezeExcite se("se", 6, 2);
  Rng rng(4);
  se.init_weights(rng);
  auto r = grad_check(se, random_tensor(2, 6, 4, 4, 17), 27);
  CHECK(r.max_rel_input < 2e-2);
  CHECK(r.max_rel_param < 2e-2);
}

TEST_CASE("linear gradients match finite differences") {
  Linear lin("fc", 6, 4);
  Rng rng(5);
  lin.init_weights(rng);
  auto r = grad_check(lin, random_tensor(3, 6, 1, 1, 18), 28);
  CHECK(r.max_rel_input < 1e-2);
  CHECK(r.max_rel_param < 1e-2);
}

TEST_CASE("global average pool forwards the mean and spreads gradient") {
  GlobalAvgPool gap;
  Tensor x(1, 2, 2, 2);
  x.data << 1, 2, 3, 4, 10, 10, 10, 10;
  Tensor y = gap.forward(x, true);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.5f));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(10.0f));
  Tensor gy(1, 2, 1, 1);
  gy.data << 4.0f, 8.0f;
  Tensor gx = gap.backward(gy);
  CHECK(gx.at(0, 0, 1, 1) == doctest::Approx(1.0f));
  CHECK(gx.at(0, 1, 0, 0) == doctest::Approx(2.0f));
}

TEST_CASE("mbconv block gradients match finite differences") {
  BlockSpec spec{6, 3, 1, 8, 1};
  MBConv block("b", 8, spec, 1);  // skip active
  Rng rng(6);
  block.init_weights(rng);
  auto r = grad_check(block, random_tensor(2, 8, 6, 6, 19), 29);
  CHECK(r.max_rel_input < 3e-2);
  CHECK(r.max_rel_param < 3e-2);
}

TEST_CASE("cross-entropy analytic gradient matches central differences at 1e-4") {
  // double precision, 8-example batch
  Rng rng(7);
  const int n = 8, c = 5;
  Eigen::MatrixXd logits(n, c);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[size_t(i)] = int(rng.next_uint(c));
    for (int j = 0; j < c; ++j) logits(i, j) = 2.0 * (rng.next_float() - 0.5f);
  }
  Eigen::MatrixXd grad;
  softmax_cross_entropy(logits, labels, &grad);
  const double eps = 1e-6;
  double max_rel = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      Eigen::MatrixXd lp = logits, lm = logits;
      lp(i, j) += eps;
      lm(i, j) -= eps;
      const double num = (softmax_cross_entropy(lp, labels, (Eigen::MatrixXd*)nullptr) -
                          softmax_cross_entropy(lm, labels, (Eigen::MatrixXd*)nullptr)) /
                         (2 * eps);
      const double rel = std::abs(num - grad(i, j)) / std::max(1e-8, std::abs(num));
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("dropout inverted scaling preserves expectation and eval is identity") {
  Dropout d(0.5f, 99);
  Tensor x(1, 1, 1, 10000);
  x.data.setOnes();
  Tensor y = d.forward(x, true);
  CHECK(y.data.mean() == doctest::Approx(1.0f).epsilon(0.05));
  Tensor ye = d.forward(x, false);
  CHECK(ye.data.isApprox(x.data));
}

TEST_CASE("adam reduces loss on a quadratic") {
  Param p;
  p.init("p", 4);
  p.value << 1, -2, 3, -4;
  Adam opt({&p}, {.lr = 0.1f});
  for (int i = 0; i < 200; ++i) {
    p.grad = 2.0f * p.value;  // d/dp ||p||^2
    opt.step();
  }
  CHECK(p.value.norm() < 1e-2);
}
