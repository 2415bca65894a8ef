#include <gtest/gtest.h>

#include <cmath>

#include "s2bnet/binarize.hpp"
#include "s2bnet/rng.hpp"

using namespace s2b;

namespace {

TEST(SignBinarize, ZeroMapsToMinusOne) {
  Tensor x = Tensor::from({3}, {0.7f, 0.0f, -3.2f});
  Tensor y = sign_binarize(x);
  EXPECT_FLOAT_EQ(y.data()[0], 1.0f);
  EXPECT_FLOAT_EQ(y.data()[1], -1.0f);
  EXPECT_FLOAT_EQ(y.data()[2], -1.0f);
}

TEST(SignBinarize, OutputsOnlyPlusMinusOne) {
  rng::Engine g = rng::make(4);
  Tensor x = Tensor::randn(g, {1000});
  for (int64_t i = 0; i < 50; ++i) x.data()[i * 17] = 0.0f;  // plant exact zeros
  Tensor y = sign_binarize(x);
  for (int64_t i = 0; i < y.numel(); ++i)
    ASSERT_TRUE(y.data()[i] == 1.0f || y.data()[i] == -1.0f);
}

TEST(SignBackwardTanh, CenterAndSaturation) {
  Tensor x = Tensor::from({3}, {0.0f, 1.0f, 10.0f});
  Tensor up = Tensor::full({3}, 1.0f);
  auto [gx, ga] = sign_backward_tanh(x, up, 1.0f);
  EXPECT_NEAR(gx.data()[0], 1.0f, 1e-6f);
  EXPECT_NEAR(gx.data()[1], 0.419974f, 1e-5f);
  EXPECT_LT(gx.data()[2], 1e-8f);
}

TEST(SignBackwardTanh, MatchesAnalyticFormula) {
  // grad_x = u * a * (1 - tanh^2(a x)); grad_a = sum u * x * (1 - tanh^2(a x)).
  rng::Engine g = rng::make(9);
  for (int trial = 0; trial < 20; ++trial) {
    TensorT<double> x = TensorT<double>::randn(g, {17});
    TensorT<double> up = TensorT<double>::randn(g, {17});
    const double alpha = rng::uniform(g, 0.2, 3.0);
    auto [gx, ga] = sign_backward_tanh(x, up, alpha);
    double want_ga = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double t = std::tanh(alpha * x.data()[i]);
      const double want = up.data()[i] * alpha * (1.0 - t * t);
      ASSERT_NEAR(gx.data()[i], want, 1e-6);
      want_ga += up.data()[i] * x.data()[i] * (1.0 - t * t);
    }
    EXPECT_NEAR(ga, want_ga, 1e-6);
  }
}

TEST(SignBackwardTanh, MatchesFiniteDifferencesOfTanh) {
  rng::Engine g = rng::make(21);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const double x = rng::uniform(g, -2.0, 2.0);
    const double alpha = rng::uniform(g, 0.5, 2.0);
    TensorT<double> xt = TensorT<double>::scalar(x);
    TensorT<double> up = TensorT<double>::scalar(1.0);
    auto [gx, ga] = sign_backward_tanh(xt, up, alpha);
    const double fd = (std::tanh(alpha * (x + h)) - std::tanh(alpha * (x - h))) / (2 * h);
    const double rel = std::abs(fd - gx.data()[0]) /
                       std::max({std::abs(fd), std::abs(gx.data()[0]), 1e-3});
    EXPECT_LT(rel, 1e-4);
  }
}

TEST(ClipSte, GateBehavior) {
  Tensor w = Tensor::from({3}, {0.3f, 1.5f, -1.0f});
  Tensor up = Tensor::from({3}, {2.0f, 2.0f, 5.0f});
  Tensor g = clip_ste(w, up);
  EXPECT_FLOAT_EQ(g.data()[0], 2.0f);  // interior passes
  EXPECT_FLOAT_EQ(g.data()[1], 0.0f);  // saturated
  EXPECT_FLOAT_EQ(g.data()[2], 0.0f);  // boundary is saturated
}

TEST(WeightScale, MeanAbsolutePerChannel) {
  Tensor w = Tensor::from({1, 1, 3, 3},
                          {0.5f, -0.5f, 0.5f, -0.5f, 0.5f, -0.5f, 0.5f, -0.5f, 0.5f});
  Tensor s = weight_scale(w);
  EXPECT_NEAR(s.data()[0], 0.5f, 1e-7f);  // |entries| sum to 4.5 over 9

  Tensor zero = Tensor::zeros({2, 1, 3, 3});
  Tensor sz = weight_scale(zero);
  EXPECT_FLOAT_EQ(sz.data()[0], 0.0f);
  EXPECT_FLOAT_EQ(sz.data()[1], 0.0f);
}

TEST(WeightScale, MatchesPlainLoop) {
  rng::Engine g = rng::make(31);
  Tensor w = Tensor::randn(g, {4, 3, 3, 3});
  Tensor s = weight_scale(w);
  for (int64_t o = 0; o < 4; ++o) {
    double acc = 0.0;
    for (int64_t j = 0; j < 27; ++j) acc += std::abs(w.data()[o * 27 + j]);
    EXPECT_NEAR(s.data()[o], acc / 27.0, 1e-7);
  }
}

TEST(WeightScale, InvariantToSignFlips) {
  rng::Engine g = rng::make(32);
  Tensor w = Tensor::randn(g, {3, 2, 3, 3});
  Tensor flipped = w.clone();
  for (int64_t i = 0; i < flipped.numel(); ++i)
    if (rng::unit(g) < 0.5) flipped.data()[i] = -flipped.data()[i];
  Tensor s1 = weight_scale(w), s2 = weight_scale(flipped);
  for (int64_t o = 0; o < 3; ++o) EXPECT_FLOAT_EQ(s1.data()[o], s2.data()[o]);
}

TEST(RpRelu, BranchValues) {
  auto eval = [](float y, float gamma, float zeta, float beta) {
    RpReluParamsT<float> p{Tensor::from({1}, {gamma}), Tensor::from({1}, {zeta}),
                           Tensor::from({1}, {beta})};
    Tensor in = Tensor::from({1, 1, 1, 1}, {y});
    return rprelu<float>(nullptr, in, p).data()[0];
  };
  EXPECT_FLOAT_EQ(eval(2.0f, 0.0f, 0.0f, 0.25f), 2.0f);    // positive branch
  EXPECT_FLOAT_EQ(eval(-2.0f, 0.0f, 0.0f, 0.25f), -0.5f);  // negative branch
  EXPECT_FLOAT_EQ(eval(0.5f, 1.0f, 0.5f, 0.0f), 0.5f);     // boundary, y <= zeta
}

// The piecewise form branches on y > zeta with the gamma shift inside both
// branches, so the one-sided limits at zeta differ by exactly
// (1 - beta) * (zeta - gamma). The jump identity is the testable property;
// continuity holds whenever that product vanishes.
TEST(RpRelu, JumpAtThresholdMatchesClosedForm) {
  rng::Engine g = rng::make(44);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = rng::normal(g);
    const double zeta = rng::normal(g);
    const double beta = rng::normal(g);
    RpReluParamsT<double> p{TensorT<double>::from({1}, {gamma}),
                            TensorT<double>::from({1}, {zeta}),
                            TensorT<double>::from({1}, {beta})};
    const double eps = 1e-7;
    TensorT<double> lo = TensorT<double>::from({1, 1, 1, 1}, {zeta});
    TensorT<double> hi = TensorT<double>::from({1, 1, 1, 1}, {zeta + eps});
    const double below = rprelu<double>(nullptr, lo, p).data()[0];
    const double above = rprelu<double>(nullptr, hi, p).data()[0];
    const double jump = (1.0 - beta) * (zeta - gamma);
    EXPECT_NEAR(above - below, jump, 1e-5);
  }
}

TEST(RpRelu, ContinuousWhenShiftsAgree) {
  rng::Engine g = rng::make(45);
  for (int trial = 0; trial < 50; ++trial) {
    const double shared = rng::normal(g);
    const double beta = rng::normal(g);
    RpReluParamsT<double> p{TensorT<double>::from({1}, {shared}),
                            TensorT<double>::from({1}, {shared}),
                            TensorT<double>::from({1}, {beta})};
    const double eps = 1e-7;
    TensorT<double> lo = TensorT<double>::from({1, 1, 1, 1}, {shared - eps});
    TensorT<double> hi = TensorT<double>::from({1, 1, 1, 1}, {shared + eps});
    const double below = rprelu<double>(nullptr, lo, p).data()[0];
    const double above = rprelu<double>(nullptr, hi, p).data()[0];
    EXPECT_NEAR(below, above, 1e-6);
  }
}

}  // namespace
