#include <gtest/gtest.h>

#include <cmath>

#include "s2bnet/ops.hpp"
#include "s2bnet/tensor.hpp"
#include "support/oracles.hpp"

using namespace s2b;

namespace {

TEST(Tensor, ShapeInvariants) {
  Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_THROW(Tensor::from({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
  EXPECT_THROW(t.at({2, 0, 0}), ShapeError);
}

TEST(Tensor, CopiesAliasStorage) {
  Tensor a = Tensor::full({3}, 1.0f);
  Tensor b = a;
  b.data()[0] = 7.0f;
  EXPECT_EQ(a.data()[0], 7.0f);
  Tensor c = a.clone();
  c.data()[0] = 9.0f;
  EXPECT_EQ(a.data()[0], 7.0f);
}

TEST(Conv2dFp, IdentityKernel) {
  rng::Engine g = rng::make(3);
  Tensor x = Tensor::randn(g, {1, 1, 3, 3});
  Tensor w = Tensor::from({1, 1, 1, 1}, {1.0f});
  Tensor y = ops::conv2d_fp<float>(nullptr, x, w, 1, 0);
  ASSERT_EQ(y.shape(), x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_FLOAT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2dFp, SinglePixelOverlap) {
  Tensor x = Tensor::from({1, 1, 1, 1}, {2.0f});
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor y = ops::conv2d_fp<float>(nullptr, x, w, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.data()[0], 2.0f);
}

TEST(Conv2dFp, MatchesNaiveOracle) {
  rng::Engine g = rng::make(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int64_t n = 1 + rng::index(g, 2);
    const int64_t ci = 1 + rng::index(g, 3);
    const int64_t co = 1 + rng::index(g, 3);
    const int64_t h = 1 + rng::index(g, 7);
    const int64_t w = 1 + rng::index(g, 7);
    const int64_t k = rng::unit(g) < 0.5 ? 1 : 3;
    const int64_t pad = rng::index(g, 2);
    const int64_t stride = 1 + rng::index(g, 2);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    Tensor x = Tensor::randn(g, {n, ci, h, w});
    Tensor wt = Tensor::randn(g, {co, ci, k, k});
    Tensor got = ops::conv2d_fp<float>(nullptr, x, wt, stride, pad);
    Tensor want = oracle::conv2d_naive(x, wt, stride, pad);
    ASSERT_EQ(got.shape(), want.shape());
    for (int64_t i = 0; i < got.numel(); ++i)
      ASSERT_NEAR(got.data()[i], want.data()[i], 1e-5f);
  }
}

TEST(Conv2dFp, RejectsChannelMismatch) {
  Tensor x = Tensor::zeros({1, 2, 4, 4});
  Tensor w = Tensor::zeros({1, 3, 3, 3});
  EXPECT_THROW(ops::conv2d_fp<float>(nullptr, x, w, 1, 1), ShapeError);
}

TEST(LayerNorm, ConstantInputGivesZeros) {
  Tensor x = Tensor::full({2, 3, 2, 2}, 4.2f);
  Tensor gamma = Tensor::full({3}, 1.0f);
  Tensor beta = Tensor::zeros({3});
  Tensor y = ops::layer_norm<float>(nullptr, x, gamma, beta);
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.data()[i], 0.0f, 1e-6f);
}

TEST(LayerNorm, NormalizesPerSample) {
  rng::Engine g = rng::make(5);
  Tensor x = Tensor::randn(g, {3, 4, 5, 5}, 2.5f, -1.0f);
  Tensor gamma = Tensor::full({4}, 1.0f);
  Tensor beta = Tensor::zeros({4});
  Tensor y = ops::layer_norm<float>(nullptr, x, gamma, beta);
  const int64_t m = 4 * 25;
  for (int64_t n = 0; n < 3; ++n) {
    double mean = 0, var = 0;
    for (int64_t j = 0; j < m; ++j) mean += y.data()[n * m + j];
    mean /= m;
    for (int64_t j = 0; j < m; ++j) {
      const double d = y.data()[n * m + j] - mean;
      var += d * d;
    }
    var /= m;
    EXPECT_LT(std::abs(mean), 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(LayerNorm, TwoValueHandEvaluation) {
  Tensor x = Tensor::from({1, 2, 1, 1}, {1.0f, 3.0f});
  Tensor gamma = Tensor::full({2}, 1.0f);
  Tensor beta = Tensor::zeros({2});
  Tensor y = ops::layer_norm<float>(nullptr, x, gamma, beta, 1e-10f);
  EXPECT_NEAR(y.data()[0], -1.0f, 1e-4f);
  EXPECT_NEAR(y.data()[1], 1.0f, 1e-4f);
}

TEST(Elementwise, TextbookValues) {
  Tensor x = Tensor::from({4}, {-2.0f, 3.0f, 0.0f, 0.5f});
  Tensor r = ops::relu<float>(nullptr, x);
  EXPECT_FLOAT_EQ(r.data()[0], 0.0f);
  EXPECT_FLOAT_EQ(r.data()[1], 3.0f);
  Tensor s = ops::sigmoid<float>(nullptr, Tensor::from({1}, {0.0f}));
  EXPECT_FLOAT_EQ(s.data()[0], 0.5f);
  Tensor t = ops::tanh_op<float>(nullptr, Tensor::from({1}, {0.0f}));
  EXPECT_FLOAT_EQ(t.data()[0], 0.0f);
}

TEST(GlobalAvgPool, ConstantMap) {
  Tensor x = Tensor::full({2, 3, 4, 4}, 2.5f);
  Tensor y = ops::global_avg_pool<float>(nullptr, x);
  ASSERT_EQ(y.shape(), (Shape{2, 3}));
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_FLOAT_EQ(y.data()[i], 2.5f);
}

TEST(Linear, HandEvaluation) {
  Tensor x = Tensor::from({1, 2}, {1.0f, 2.0f});
  Tensor w = Tensor::from({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  Tensor b = Tensor::from({2}, {0.5f, -0.5f});
  Tensor y = ops::linear<float>(nullptr, x, w, b);
  EXPECT_FLOAT_EQ(y.data()[0], 1.5f);
  EXPECT_FLOAT_EQ(y.data()[1], 1.5f);
}

TEST(Bilinear, PreservesConstants) {
  Tensor x = Tensor::full({1, 1, 2, 2}, 5.0f);
  Tensor y = ops::bilinear_upsample2x<float>(nullptr, x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_FLOAT_EQ(y.data()[i], 5.0f);
}

TEST(Bilinear, SinglePixel) {
  Tensor x = Tensor::from({1, 1, 1, 1}, {3.0f});
  Tensor y = ops::bilinear_upsample2x<float>(nullptr, x);
  for (int64_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y.data()[i], 3.0f);
}

TEST(Bilinear, RampHalfPixelCenters) {
  Tensor x = Tensor::from({1, 1, 1, 2}, {0.0f, 1.0f});
  Tensor y = ops::bilinear_upsample2x<float>(nullptr, x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
  const float want[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int64_t col = 0; col < 4; ++col) {
    EXPECT_NEAR(y.data()[col], want[col], 1e-6f);
    EXPECT_NEAR(y.data()[4 + col], want[col], 1e-6f);
  }
}

TEST(ChannelOps, ConcatSliceRoundTrip) {
  rng::Engine g = rng::make(8);
  Tensor a = Tensor::randn(g, {2, 3, 2, 2});
  Tensor b = Tensor::randn(g, {2, 2, 2, 2});
  Tensor cat = ops::concat_channels<float>(nullptr, a, b);
  ASSERT_EQ(cat.shape(), (Shape{2, 5, 2, 2}));
  Tensor a2 = ops::slice_channels<float>(nullptr, cat, 0, 3);
  Tensor b2 = ops::slice_channels<float>(nullptr, cat, 3, 5);
  for (int64_t i = 0; i < a.numel(); ++i) EXPECT_FLOAT_EQ(a2.data()[i], a.data()[i]);
  for (int64_t i = 0; i < b.numel(); ++i) EXPECT_FLOAT_EQ(b2.data()[i], b.data()[i]);
}

TEST(Ops, ShapeMismatchRejected) {
  Tensor a = Tensor::zeros({2, 2});
  Tensor b = Tensor::zeros({2, 3});
  EXPECT_THROW(ops::add<float>(nullptr, a, b), ShapeError);
  EXPECT_THROW(ops::mul<float>(nullptr, a, b), ShapeError);
  EXPECT_THROW(ops::l1_loss<float>(nullptr, a, b), ShapeError);
}

TEST(Ops, ForwardDeterminism) {
  rng::Engine g1 = rng::make(123), g2 = rng::make(123);
  Tensor x1 = Tensor::randn(g1, {2, 3, 6, 6});
  Tensor x2 = Tensor::randn(g2, {2, 3, 6, 6});
  Tensor w1 = Tensor::randn(g1, {4, 3, 3, 3});
  Tensor w2 = Tensor::randn(g2, {4, 3, 3, 3});
  Tensor y1 = ops::conv2d_fp<float>(nullptr, x1, w1, 1, 1);
  Tensor y2 = ops::conv2d_fp<float>(nullptr, x2, w2, 1, 1);
  for (int64_t i = 0; i < y1.numel(); ++i)
    ASSERT_EQ(y1.data()[i], y2.data()[i]) << "bitwise mismatch at " << i;
}

TEST(Ops, FiniteOutputsOnFiniteInputs) {
  rng::Engine g = rng::make(77);
  Tensor x = Tensor::randn(g, {1, 4, 8, 8}, 10.0f);
  Tensor w = Tensor::randn(g, {4, 4, 3, 3}, 10.0f);
  EXPECT_TRUE(ops::conv2d_fp<float>(nullptr, x, w, 1, 1).all_finite());
  EXPECT_TRUE(ops::sigmoid<float>(nullptr, x).all_finite());
  Tensor gamma = Tensor::full({4}, 1.0f), beta = Tensor::zeros({4});
  EXPECT_TRUE(ops::layer_norm<float>(nullptr, x, gamma, beta).all_finite());
}

}  // namespace
