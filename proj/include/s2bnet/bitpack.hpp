#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b {

/// Bit-packed {-1,+1} vector with a validity mask. Bit 1 encodes +1, bit 0
/// encodes -1; valid bit 0 marks padding that must contribute nothing to a
/// dot product. Trailing bits beyond logical_len are zero in both planes.
struct PackedBitPlane {
  std::vector<uint64_t> bits;
  std::vector<uint64_t> valid;
  int64_t logical_len = 0;

  static int64_t words_for(int64_t len) { return (len + 63) / 64; }
};

namespace bitdetail {

template <class T>
void require_pm1(const T* v, int64_t n, const char* who) {
  for (int64_t i = 0; i < n; ++i)
    if (v[i] != T(1) && v[i] != T(-1))
      throw ValueError(std::string(who) + ": value at index " + std::to_string(i) +
                       " is not in {-1,+1}");
}

// Bits [start, start+count) of a row_len-bit row; out-of-range positions
// read as 0. count must be <= 64.
inline uint64_t extract_window(const std::vector<uint64_t>& words, int64_t row_len,
                               int64_t start, int64_t count) {
  int64_t dst0 = 0;
  if (start < 0) {
    dst0 = -start;
    count -= dst0;
    start = 0;
  }
  if (count <= 0 || start >= row_len) return 0;
  if (count > row_len - start) count = row_len - start;
  const int64_t wi = start >> 6;
  const int64_t off = start & 63;
  uint64_t v = words[static_cast<size_t>(wi)] >> off;
  if (off + count > 64)  // spill implies off > 0, so the shift below is < 64
    v |= words[static_cast<size_t>(wi + 1)] << (64 - off);
  const uint64_t m = count >= 64 ? ~0ull : ((1ull << count) - 1ull);
  return (v & m) << dst0;
}

inline void insert_window(std::vector<uint64_t>& words, int64_t pos, uint64_t value,
                          int64_t count) {
  const int64_t wi = pos >> 6;
  const int64_t off = pos & 63;
  words[static_cast<size_t>(wi)] |= value << off;
  if (off + count > 64) words[static_cast<size_t>(wi + 1)] |= value >> (64 - off);
}

inline int64_t dot_words(const uint64_t* ab, const uint64_t* av, const uint64_t* bb,
                         const uint64_t* bv, size_t nw) {
  int64_t matches = 0, total = 0;
  for (size_t i = 0; i < nw; ++i) {
    const uint64_t m = av[i] & bv[i];
    matches += std::popcount(~(ab[i] ^ bb[i]) & m);
    total += std::popcount(m);
  }
  return 2 * matches - total;
}

}  // namespace bitdetail

/// Packs a strictly {-1,+1} vector; bit i is set iff v[i] == +1 and the mask
/// (when given) is nonzero there. Rejects any value outside {-1,+1}.
template <class T>
PackedBitPlane pack_signs(std::span<const T> v, std::span<const T> mask = {}) {
  bitdetail::require_pm1(v.data(), static_cast<int64_t>(v.size()), "pack_signs");
  check_shape(mask.empty() || mask.size() == v.size(),
              "pack_signs: mask length mismatch");
  PackedBitPlane p;
  p.logical_len = static_cast<int64_t>(v.size());
  const int64_t nw = PackedBitPlane::words_for(p.logical_len);
  p.bits.assign(static_cast<size_t>(nw), 0);
  p.valid.assign(static_cast<size_t>(nw), 0);
  for (int64_t i = 0; i < p.logical_len; ++i) {
    const bool in = mask.empty() || mask[static_cast<size_t>(i)] != T(0);
    if (!in) continue;
    p.valid[static_cast<size_t>(i >> 6)] |= 1ull << (i & 63);
    if (v[static_cast<size_t>(i)] == T(1))
      p.bits[static_cast<size_t>(i >> 6)] |= 1ull << (i & 63);
  }
  return p;
}

template <class T>
PackedBitPlane pack_signs(const TensorT<T>& v) {
  return pack_signs(std::span<const T>(v.data(), static_cast<size_t>(v.numel())));
}

/// Unpacks to {-1,+1}; positions masked out at pack time come back as -1.
template <class T>
std::vector<T> unpack_signs(const PackedBitPlane& p) {
  std::vector<T> out(static_cast<size_t>(p.logical_len));
  for (int64_t i = 0; i < p.logical_len; ++i)
    out[static_cast<size_t>(i)] =
        (p.bits[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1 ? T(1) : T(-1);
  return out;
}

/// Exact ternary dot product of two packed vectors: masked-out positions
/// contribute 0, everything else +-1 agreement/disagreement.
inline int64_t xnor_popcount_dot(const PackedBitPlane& a, const PackedBitPlane& b) {
  check_shape(a.logical_len == b.logical_len,
              "xnor_popcount_dot: length mismatch " + std::to_string(a.logical_len) +
                  " vs " + std::to_string(b.logical_len));
  return bitdetail::dot_words(a.bits.data(), a.valid.data(), b.bits.data(),
                              b.valid.data(), a.bits.size());
}

/// Binary convolution over bit-packed operands, stride 1, zero padding
/// realized as masked (zero-contribution) positions. Bits are packed along
/// the flattened (Cin,K,K) receptive field per output position; each output
/// is a single masked XNOR-popcount dot against the packed weight plane.
/// An optional mask marks valid input positions; masked-out pixels behave
/// like padding. Output is integer-exact in [-Cin*K*K, +Cin*K*K].
template <class T>
IntTensor binary_conv2d_packed(const TensorT<T>& xb, const TensorT<T>& wb, int64_t pad,
                               const TensorT<T>* mask = nullptr) {
  check_shape(xb.rank() == 4, "binary_conv2d_packed: input must be [N,Cin,H,W]");
  check_shape(wb.rank() == 4, "binary_conv2d_packed: weight must be [Cout,Cin,K,K]");
  check_shape(xb.dim(1) == wb.dim(1), "binary_conv2d_packed: Cin mismatch");
  check_shape(wb.dim(2) == wb.dim(3), "binary_conv2d_packed: kernel must be square");
  const int64_t k = wb.dim(2);
  check_value(k % 2 == 1, "binary_conv2d_packed: kernel size must be odd");
  check_value(pad >= 0, "binary_conv2d_packed: pad must be >= 0");
  check_value(k <= 63, "binary_conv2d_packed: kernel size limit is 63");
  if (mask)
    check_shape(mask->same_shape(xb), "binary_conv2d_packed: mask shape mismatch");

  const int64_t n = xb.dim(0), ci = xb.dim(1), h = xb.dim(2), w = xb.dim(3);
  const int64_t co = wb.dim(0);
  const int64_t ho = h + 2 * pad - k + 1;
  const int64_t wo = w + 2 * pad - k + 1;
  check_shape(ho >= 1 && wo >= 1, "binary_conv2d_packed: output would be empty");

  // Weight planes: contiguous [Cin,K,K] slices pack directly.
  const int64_t plane_len = ci * k * k;
  std::vector<PackedBitPlane> wplanes;
  wplanes.reserve(static_cast<size_t>(co));
  for (int64_t o = 0; o < co; ++o)
    wplanes.push_back(pack_signs(
        std::span<const T>(wb.data() + o * plane_len, static_cast<size_t>(plane_len))));

  // Input rows packed once; window extraction assembles patches from them.
  const int64_t rows = n * ci * h;
  std::vector<PackedBitPlane> xrows(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    std::span<const T> vals(xb.data() + r * w, static_cast<size_t>(w));
    std::span<const T> mrow =
        mask ? std::span<const T>(mask->data() + r * w, static_cast<size_t>(w))
             : std::span<const T>{};
    xrows[static_cast<size_t>(r)] = pack_signs(vals, mrow);
  }

  IntTensor y = IntTensor::zeros({n, co, ho, wo});
  const int64_t patch_words = PackedBitPlane::words_for(plane_len);
  parallel_for(0, n * ho, [&](int64_t lo, int64_t hi) {
    std::vector<uint64_t> pbits(static_cast<size_t>(patch_words));
    std::vector<uint64_t> pvalid(static_cast<size_t>(patch_words));
    for (int64_t job = lo; job < hi; ++job) {
      const int64_t in = job / ho, oh = job % ho;
      for (int64_t ow = 0; ow < wo; ++ow) {
        std::fill(pbits.begin(), pbits.end(), 0);
        std::fill(pvalid.begin(), pvalid.end(), 0);
        for (int64_t ic = 0; ic < ci; ++ic) {
          for (int64_t kh = 0; kh < k; ++kh) {
            const int64_t ih = oh + kh - pad;
            if (ih < 0 || ih >= h) continue;
            const auto& row = xrows[static_cast<size_t>((in * ci + ic) * h + ih)];
            const int64_t start = ow - pad;
            const uint64_t bw = bitdetail::extract_window(row.bits, w, start, k);
            const uint64_t vw = bitdetail::extract_window(row.valid, w, start, k);
            const int64_t q0 = (ic * k + kh) * k;
            bitdetail::insert_window(pbits, q0, bw, k);
            bitdetail::insert_window(pvalid, q0, vw, k);
          }
        }
        int32_t* yrow = y.data() + ((in * co) * ho + oh) * wo;
        for (int64_t o = 0; o < co; ++o) {
          const auto& wp = wplanes[static_cast<size_t>(o)];
          yrow[o * ho * wo + ow] = static_cast<int32_t>(
              bitdetail::dot_words(pbits.data(), pvalid.data(), wp.bits.data(),
                                   wp.valid.data(), static_cast<size_t>(patch_words)));
        }
      }
    }
  });
  return y;
}

/// Reference convolution over {-1,0,+1}: padded and masked-out positions are
/// exactly 0. Written as plain nested loops, independent of the packed path.
template <class T>
IntTensor ternary_conv2d_reference(const TensorT<T>& xb, const TensorT<T>& wb,
                                   int64_t pad, const TensorT<T>* mask = nullptr) {
  check_shape(xb.rank() == 4 && wb.rank() == 4, "ternary_conv2d_reference: rank 4");
  check_shape(xb.dim(1) == wb.dim(1), "ternary_conv2d_reference: Cin mismatch");
  bitdetail::require_pm1(xb.data(), xb.numel(), "ternary_conv2d_reference");
  bitdetail::require_pm1(wb.data(), wb.numel(), "ternary_conv2d_reference");
  const int64_t n = xb.dim(0), ci = xb.dim(1), h = xb.dim(2), w = xb.dim(3);
  const int64_t co = wb.dim(0), k = wb.dim(2);
  const int64_t ho = h + 2 * pad - k + 1;
  const int64_t wo = w + 2 * pad - k + 1;
  IntTensor y = IntTensor::zeros({n, co, ho, wo});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t o = 0; o < co; ++o)
      for (int64_t oh = 0; oh < ho; ++oh)
        for (int64_t ow = 0; ow < wo; ++ow) {
          int32_t acc = 0;
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t ih = oh + kh - pad;
                const int64_t iw = ow + kw - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                const int64_t xoff = ((in * ci + ic) * h + ih) * w + iw;
                if (mask && mask->data()[xoff] == T(0)) continue;
                const int xv = xb.data()[xoff] > T(0) ? 1 : -1;
                const int wv = wb.data()[((o * ci + ic) * k + kh) * k + kw] > T(0) ? 1 : -1;
                acc += xv * wv;
              }
          y.data()[((in * co + o) * ho + oh) * wo + ow] = acc;
        }
  return y;
}

/// Applies the per-output-channel weight scale to integer conv outputs.
template <class T>
TensorT<T> rescale_output(const IntTensor& y_int, const TensorT<T>& s) {
  check_shape(y_int.rank() == 4, "rescale_output: [N,Cout,H,W] tensor required");
  check_shape(s.rank() == 1 && s.dim(0) == y_int.dim(1),
              "rescale_output: scale length must equal Cout");
  TensorT<T> y = TensorT<T>::zeros(y_int.shape());
  const int64_t n = y_int.dim(0), co = y_int.dim(1), hw = y_int.dim(2) * y_int.dim(3);
  for (int64_t i = 0; i < n * co; ++i) {
    const T sv = s.data()[i % co];
    const int32_t* src = y_int.data() + i * hw;
    T* dst = y.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) dst[j] = static_cast<T>(src[j]) * sv;
  }
  return y;
}

}  // namespace s2b
