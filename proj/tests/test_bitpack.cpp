#include <gtest/gtest.h>

#include <vector>

#include "s2bnet/bitpack.hpp"
#include "s2bnet/rng.hpp"
#include "support/oracles.hpp"

using namespace s2b;

namespace {

std::vector<float> random_signs(rng::Engine& g, int64_t n) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng::unit(g) < 0.5 ? -1.0f : 1.0f;
  return v;
}

TEST(PackSigns, BitLayout) {
  const std::vector<float> v{1.0f, -1.0f, 1.0f};
  const PackedBitPlane p = pack_signs(std::span<const float>(v));
  ASSERT_EQ(p.logical_len, 3);
  ASSERT_EQ(p.bits.size(), 1u);
  EXPECT_EQ(p.bits[0], 0b101u);
  EXPECT_EQ(p.valid[0], 0b111u);
}

TEST(PackSigns, EmptyVector) {
  const std::vector<float> v;
  const PackedBitPlane p = pack_signs(std::span<const float>(v));
  EXPECT_EQ(p.logical_len, 0);
  EXPECT_TRUE(p.bits.empty());
}

TEST(PackSigns, RejectsNonBinaryValues) {
  const std::vector<float> bad{1.0f, 0.5f};
  EXPECT_THROW(pack_signs(std::span<const float>(bad)), ValueError);
  const std::vector<float> zero{0.0f};
  EXPECT_THROW(pack_signs(std::span<const float>(zero)), ValueError);
}

TEST(PackSigns, RoundTripThousandVectors) {
  rng::Engine g = rng::make(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n = rng::index(g, 131);
    const auto v = random_signs(g, n);
    const auto unpacked = unpack_signs<float>(pack_signs(std::span<const float>(v)));
    ASSERT_EQ(unpacked.size(), v.size());
    for (size_t i = 0; i < v.size(); ++i) ASSERT_EQ(unpacked[i], v[i]);
  }
}

TEST(PackSigns, TrailingBitsStayZero) {
  rng::Engine g = rng::make(18);
  const auto v = random_signs(g, 70);
  const PackedBitPlane p = pack_signs(std::span<const float>(v));
  ASSERT_EQ(p.bits.size(), 2u);
  EXPECT_EQ(p.bits[1] >> 6, 0u);   // bits beyond logical_len are zero
  EXPECT_EQ(p.valid[1] >> 6, 0u);
  // Masked-out positions carry bit 0 in both planes.
  std::vector<float> mask(70, 1.0f);
  mask[3] = 0.0f;
  const PackedBitPlane pm =
      pack_signs(std::span<const float>(v), std::span<const float>(mask));
  for (size_t w = 0; w < pm.bits.size(); ++w)
    EXPECT_EQ(pm.bits[w] & ~pm.valid[w], 0u);
}

TEST(XnorPopcountDot, HandCases) {
  const std::vector<float> a{1.0f, -1.0f, 1.0f};
  const std::vector<float> b{1.0f, 1.0f, -1.0f};
  EXPECT_EQ(xnor_popcount_dot(pack_signs(std::span<const float>(a)),
                              pack_signs(std::span<const float>(b))),
            -1);
  const std::vector<float> same(8, 1.0f);
  std::vector<float> opposite(8, -1.0f);
  EXPECT_EQ(xnor_popcount_dot(pack_signs(std::span<const float>(same)),
                              pack_signs(std::span<const float>(same))),
            8);
  EXPECT_EQ(xnor_popcount_dot(pack_signs(std::span<const float>(same)),
                              pack_signs(std::span<const float>(opposite))),
            -8);
}

TEST(XnorPopcountDot, MatchesBruteForceWithMasks) {
  rng::Engine g = rng::make(23);
  for (int trial = 0; trial < 300; ++trial) {
    const int64_t n = 1 + rng::index(g, 150);
    const auto av = random_signs(g, n);
    const auto bv = random_signs(g, n);
    std::vector<float> am(static_cast<size_t>(n)), bm(static_cast<size_t>(n));
    for (auto& m : am) m = rng::unit(g) < 0.8 ? 1.0f : 0.0f;
    for (auto& m : bm) m = rng::unit(g) < 0.8 ? 1.0f : 0.0f;
    const auto pa = pack_signs(std::span<const float>(av), std::span<const float>(am));
    const auto pb = pack_signs(std::span<const float>(bv), std::span<const float>(bm));
    std::vector<int> ta(static_cast<size_t>(n)), tb(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      ta[static_cast<size_t>(i)] = am[static_cast<size_t>(i)] != 0.0f
                                       ? (av[static_cast<size_t>(i)] > 0 ? 1 : -1)
                                       : 0;
      tb[static_cast<size_t>(i)] = bm[static_cast<size_t>(i)] != 0.0f
                                       ? (bv[static_cast<size_t>(i)] > 0 ? 1 : -1)
                                       : 0;
    }
    ASSERT_EQ(xnor_popcount_dot(pa, pb), oracle::ternary_dot(ta, tb));
  }
}

TEST(XnorPopcountDot, LengthMismatchRejected) {
  const std::vector<float> a{1.0f, -1.0f};
  const std::vector<float> b{1.0f};
  EXPECT_THROW(xnor_popcount_dot(pack_signs(std::span<const float>(a)),
                                 pack_signs(std::span<const float>(b))),
               ShapeError);
}

Tensor random_sign_tensor(rng::Engine& g, Shape shape) {
  Tensor t = Tensor::zeros(shape);
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = rng::unit(g) < 0.5 ? -1.0f : 1.0f;
  return t;
}

TEST(BinaryConv, SinglePixelPadOne) {
  Tensor x = Tensor::full({1, 1, 1, 1}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  IntTensor y = binary_conv2d_packed(x, w, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.data()[0], 1);  // only the center tap overlaps
}

TEST(BinaryConv, FullAgreementInterior) {
  Tensor x = Tensor::full({1, 1, 4, 4}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  IntTensor y = binary_conv2d_packed(x, w, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.data()[i], 9);
}

TEST(BinaryConv, RejectsNonBinarizedInput) {
  Tensor x = Tensor::full({1, 1, 2, 2}, 0.5f);
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.0f);
  EXPECT_THROW(binary_conv2d_packed(x, w, 0), ValueError);
}

TEST(BinaryConv, MatchesTernaryOracleRandomized) {
  rng::Engine g = rng::make(29);
  for (int trial = 0; trial < 60; ++trial) {
    const int64_t n = 1 + rng::index(g, 2);
    const int64_t ci = 1 + rng::index(g, 4);
    const int64_t co = 1 + rng::index(g, 4);
    const int64_t h = 1 + rng::index(g, 8);
    const int64_t w = 1 + rng::index(g, 8);
    const int64_t k = rng::unit(g) < 0.5 ? 1 : 3;
    const int64_t pad = rng::index(g, 3);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    Tensor x = random_sign_tensor(g, {n, ci, h, w});
    Tensor wt = random_sign_tensor(g, {co, ci, k, k});
    Tensor mask = Tensor::zeros({n, ci, h, w});
    for (int64_t i = 0; i < mask.numel(); ++i)
      mask.data()[i] = rng::unit(g) < 0.75 ? 1.0f : 0.0f;
    IntTensor fast = binary_conv2d_packed(x, wt, pad, &mask);
    IntTensor ref = ternary_conv2d_reference(x, wt, pad, &mask);
    ASSERT_EQ(fast.shape(), ref.shape());
    for (int64_t i = 0; i < fast.numel(); ++i)
      ASSERT_EQ(fast.data()[i], ref.data()[i]) << "trial " << trial << " idx " << i;
  }
}

// Widening the image with masked filler and dropping the padding must give
// the padded result exactly.
TEST(BinaryConv, MaskSoundness) {
  rng::Engine g = rng::make(37);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t ci = 1 + rng::index(g, 3);
    const int64_t co = 1 + rng::index(g, 3);
    const int64_t h = 2 + rng::index(g, 6);
    const int64_t w = 2 + rng::index(g, 6);
    Tensor x = random_sign_tensor(g, {1, ci, h, w});
    Tensor wt = random_sign_tensor(g, {co, ci, 3, 3});
    IntTensor padded = binary_conv2d_packed(x, wt, 1);

    Tensor wide = Tensor::zeros({1, ci, h + 2, w + 2});
    Tensor mask = Tensor::zeros({1, ci, h + 2, w + 2});
    for (int64_t i = 0; i < wide.numel(); ++i)
      wide.data()[i] = rng::unit(g) < 0.5 ? -1.0f : 1.0f;  // junk in the ring
    for (int64_t c = 0; c < ci; ++c)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx) {
          wide.at({0, c, y + 1, xx + 1}) = x.at({0, c, y, xx});
          mask.at({0, c, y + 1, xx + 1}) = 1.0f;
        }
    IntTensor cropped = binary_conv2d_packed(wide, wt, 0, &mask);
    ASSERT_EQ(cropped.shape(), padded.shape());
    for (int64_t i = 0; i < padded.numel(); ++i)
      ASSERT_EQ(cropped.data()[i], padded.data()[i]);
  }
}

TEST(BinaryConv, NegatingWeightsNegatesOutputs) {
  rng::Engine g = rng::make(41);
  Tensor x = random_sign_tensor(g, {2, 3, 6, 6});
  Tensor wt = random_sign_tensor(g, {4, 3, 3, 3});
  Tensor neg = wt.clone();
  for (int64_t i = 0; i < neg.numel(); ++i) neg.data()[i] = -neg.data()[i];
  IntTensor y1 = binary_conv2d_packed(x, wt, 1);
  IntTensor y2 = binary_conv2d_packed(x, neg, 1);
  for (int64_t i = 0; i < y1.numel(); ++i) ASSERT_EQ(y1.data()[i], -y2.data()[i]);
}

TEST(RescaleOutput, Cases) {
  IntTensor y = IntTensor::from({1, 2, 1, 1}, {9, 5});
  Tensor s = Tensor::from({2}, {0.5f, 0.0f});
  Tensor out = rescale_output(y, s);
  EXPECT_FLOAT_EQ(out.data()[0], 4.5f);
  EXPECT_FLOAT_EQ(out.data()[1], 0.0f);  // zero-scale channel goes dark

  rng::Engine g = rng::make(43);
  IntTensor yr = IntTensor::zeros({2, 3, 4, 4});
  for (int64_t i = 0; i < yr.numel(); ++i)
    yr.data()[i] = static_cast<int32_t>(rng::index(g, 19)) - 9;
  Tensor sr = Tensor::randn(g, {3});
  Tensor got = rescale_output(yr, sr);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t p = 0; p < 16; ++p) {
        const int64_t i = (n * 3 + c) * 16 + p;
        ASSERT_EQ(got.data()[i], static_cast<float>(yr.data()[i]) * sr.data()[c]);
      }
}

}  // namespace
