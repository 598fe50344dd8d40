#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/gradcheck.hpp"
#include "support/gradient_suite.hpp"
#include "surface/nn/layers.hpp"
#include "surface/nn/loss.hpp"
#include "surface/nn/sgd.hpp"

using namespace surface;
using namespace surface::nn;
using surface::testing::naive_conv2d;
using surface::testing::random_tensor;

TEST(Conv2d, PointwiseUnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor<double> x = random_tensor({2, 1, 5, 4}, rng);
  const Tensor<double> w({1, 1, 1, 1}, 1.0), b({1}, 0.0);
  EXPECT_EQ(conv2d_forward(x, w, b, 1, 0), x);
}

TEST(Conv2d, AllOnesKernelOnConstantInput) {
  const Tensor<float> x({1, 1, 5, 5}, 1.0f), w({1, 1, 3, 3}, 1.0f), b({1}, 0.0f);
  const Tensor<float> y = conv2d_forward(x, w, b, 1, 0);
  ASSERT_EQ(y.shape(), Shape({1, 1, 3, 3}));
  for (float v : y.values()) EXPECT_EQ(v, 9.0f);
}

TEST(Conv2d, MatchesNaiveOracleOnRandomInput) {
  std::mt19937_64 rng(7);
  const Tensor<double> x = random_tensor({2, 3, 8, 8}, rng), w = random_tensor({4, 3, 3, 3}, rng),
                       b = random_tensor({4}, rng);
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1}) {
      const Tensor<double> fast = conv2d_forward(x, w, b, stride, pad);
      const Tensor<double> slow = naive_conv2d(x, w, b, stride, pad);
      ASSERT_EQ(fast.shape(), slow.shape());
      for (std::size_t i = 0; i < fast.size(); ++i) {
        EXPECT_NEAR(fast[i], slow[i], 1e-6 * std::max(1.0, std::abs(slow[i])));
      }
    }
  }
  // float path as well
  const Tensor<float> xf = tensor_cast<float>(x), wf = tensor_cast<float>(w), bf = tensor_cast<float>(b);
  const Tensor<float> yf = conv2d_forward(xf, wf, bf, 1, 1);
  const Tensor<double> ref = naive_conv2d(x, w, b, 1, 1);
  for (std::size_t i = 0; i < yf.size(); ++i) EXPECT_NEAR(yf[i], ref[i], 1e-5 * std::max(1.0, std::abs(ref[i])));
}

TEST(Conv2d, OutputSizeFormulaAndShapeErrors) {
  const Tensor<float> x({1, 2, 9, 7}), w({3, 2, 3, 3}), b({3});
  EXPECT_EQ(conv2d_forward(x, w, b, 2, 1).shape(), Shape({1, 3, 5, 4}));
  const Tensor<float> wrong({3, 4, 3, 3});
  EXPECT_THROW(conv2d_forward(x, wrong, b, 1, 0), ShapeError);
  const Tensor<float> tiny({1, 2, 2, 2});
  EXPECT_THROW(conv2d_forward(tiny, w, b, 1, 0), ShapeError);
}

TEST(Relu, ClampsNegatives) {
  const Tensor<float> x({3}, std::vector<float>{-1.0f, 0.0f, 2.0f});
  EXPECT_EQ(relu_forward(x).storage(), (std::vector<float>{0.0f, 0.0f, 2.0f}));
}

TEST(GlobalAvgPool, ConstantMapGivesConstant) {
  const Tensor<float> x({2, 3, 4, 5}, 2.5f);
  const Tensor<float> y = global_avg_pool_forward(x);
  ASSERT_EQ(y.shape(), Shape({2, 3}));
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 2.5f);
}

TEST(MaxPool, BackwardRoutesOnlyToArgmax) {
  const Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1.0, 4.0, 3.0, 2.0});
  const auto r = maxpool2d_forward(x, 2, 2, 0);
  EXPECT_EQ(r.output[0], 4.0);
  const Tensor<double> dx = maxpool2d_backward(Tensor<double>({1, 1, 1, 1}, 5.0), r.argmax, x.shape());
  EXPECT_EQ(dx.storage(), (std::vector<double>{0.0, 5.0, 0.0, 0.0}));
}

TEST(BatchNorm, ConstantInputTrainModeGivesBeta) {
  Tensor<double> x({4, 2, 3, 3}, 3.0);
  Tensor<double> gamma({2}, 1.7), beta({2}, std::vector<double>{0.25, -0.5});
  Tensor<double> rm({2}), rv({2}, 1.0);
  BatchNormCache<double> cache;
  const Tensor<double> y = batchnorm_forward_train(x, gamma, beta, rm, rv, 0.9, 1e-5, cache);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y[(n * 2 + c) * 9 + i], beta[c]);
  // running stats move toward the batch mean with momentum 0.9
  EXPECT_NEAR(rm[0], 0.1 * 3.0, 1e-12);
}

TEST(BatchNorm, InferModeWithUnitStatsIsIdentity) {
  std::mt19937_64 rng(3);
  const Tensor<double> x = random_tensor({2, 3, 4, 4}, rng);
  const Tensor<double> gamma({3}, 1.0), beta({3}, 0.0), rm({3}, 0.0), rv({3}, 1.0);
  const Tensor<double> y = batchnorm_forward_infer(x, gamma, beta, rm, rv, 1e-12);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-11);
}

TEST(BatchNorm, TrainModeRejectsBatchOfOne) {
  Tensor<float> x({1, 2, 3, 3}), g({2}, 1.0f), b({2}), rm({2}), rv({2}, 1.0f);
  BatchNormCache<float> cache;
  EXPECT_THROW(batchnorm_forward_train(x, g, b, rm, rv, 0.9, 1e-5, cache), ShapeError);
}

TEST(SmoothedCrossEntropy, UniformLogitsGiveLogK) {
  const Tensor<double> logits({4, 6}, 0.3);
  const std::vector<std::size_t> labels = {0, 2, 5, 3};
  const auto r = smoothed_cross_entropy(logits, labels, SmoothedLossSpec{0.1, 6});
  EXPECT_NEAR(r.loss, std::log(6.0), 1e-12);
}

TEST(SmoothedCrossEntropy, TargetVectorConvention) {
  const auto t = smoothed_targets(2, SmoothedLossSpec{0.1, 6});
  double sum = 0.0;
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(t[k], k == 2 ? 0.9 + 0.1 / 6.0 : 0.1 / 6.0, 1e-15);
    sum += t[k];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(t[2], 0.9166666666666666, 1e-15);
  EXPECT_NEAR(t[0], 0.0166666666666666, 1e-15);
}

TEST(SmoothedCrossEntropy, RejectsBadLabelsAndWidths) {
  const Tensor<double> logits({1, 6}, 0.0);
  const std::vector<std::size_t> bad = {6};
  EXPECT_THROW(smoothed_cross_entropy(logits, bad, SmoothedLossSpec{0.1, 6}), ShapeError);
  const std::vector<std::size_t> ok = {1};
  EXPECT_THROW(smoothed_cross_entropy(logits, ok, SmoothedLossSpec{0.1, 5}), ShapeError);
}

TEST(Softmax, RowsArePositiveAndSumToOne) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<float> logits = tensor_cast<float>(random_tensor({5, 6}, rng, -20.0, 20.0));
    const Tensor<float> p = softmax(logits);
    for (std::size_t b = 0; b < 5; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_GT(p[b * 6 + k], 0.0f);
        s += p[b * 6 + k];
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Sgd, ZeroLearningRateAndZeroGradientAreIdentity) {
  std::mt19937_64 rng(5);
  Tensor<double> p = random_tensor({3, 4}, rng);
  const Tensor<double> before = p, g = random_tensor({3, 4}, rng), zero({3, 4});
  Tensor<double> vel;
  sgd_step(p, g, vel, SgdConfig{0.0, 0.0});
  EXPECT_EQ(p, before);
  sgd_step(p, zero, vel, SgdConfig{0.5, 0.9});
  EXPECT_EQ(p, before);
}

TEST(Sgd, QuadraticContractsGeometrically) {
  Tensor<double> w({1}, 1.0), vel;
  for (int k = 1; k <= 10; ++k) {
    const Tensor<double> grad({1}, 2.0 * w[0]);
    sgd_step(w, grad, vel, SgdConfig{0.1, 0.0});
    EXPECT_NEAR(w[0], std::pow(0.8, k), 1e-14);
  }
}

TEST(Sgd, DefaultsArePublishedValues) {
  const SgdConfig c;
  EXPECT_DOUBLE_EQ(c.learning_rate, 3e-5);
  EXPECT_DOUBLE_EQ(c.momentum, 0.0);
  EXPECT_THROW(Sgd<float>(SgdConfig{0.1, 1.0}), ShapeError);
  Tensor<float> p({2}), g({3}), v;
  EXPECT_THROW(sgd_step(p, g, v, SgdConfig{}), ShapeError);
}

TEST(GradientSuite, EveryBackwardMatchesFiniteDifferences) {
  for (const auto& r : surface::testing::run_gradient_suite(2024, 20, 2)) {
    EXPECT_TRUE(r.passed()) << r.op << ": max rel err " << r.max_rel_error << " over " << r.cases << " cases";
    EXPECT_GE(r.cases, r.op.starts_with("tiny") ? 2u : 20u);
  }
}
