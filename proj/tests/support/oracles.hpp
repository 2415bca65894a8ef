#pragma once

// Independent reference implementations used to pin expected values.
// Everything here is written as plain scalar loops and must stay decoupled
// from the library's optimized paths.

#include <cmath>
#include <cstdint>
#include <vector>

#include "s2bnet/tensor.hpp"

namespace oracle {

// Naive full-precision cross-correlation with zero padding.
template <class T>
s2b::TensorT<T> conv2d_naive(const s2b::TensorT<T>& x, const s2b::TensorT<T>& w,
                             int64_t stride, int64_t pad) {
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(0), k = w.dim(2);
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (wd + 2 * pad - k) / stride + 1;
  s2b::TensorT<T> y = s2b::TensorT<T>::zeros({n, co, ho, wo});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oc = 0; oc < co; ++oc)
      for (int64_t oh = 0; oh < ho; ++oh)
        for (int64_t ow = 0; ow < wo; ++ow) {
          double acc = 0.0;
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t ih = oh * stride + kh - pad;
                const int64_t iw = ow * stride + kw - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                acc += static_cast<double>(x.data()[((in * ci + ic) * h + ih) * wd + iw]) *
                       static_cast<double>(w.data()[((oc * ci + ic) * k + kh) * k + kw]);
              }
          y.data()[((in * co + oc) * ho + oh) * wo + ow] = static_cast<T>(acc);
        }
  return y;
}

// Brute-force ternary dot product over {-1, 0, +1}.
inline int64_t ternary_dot(const std::vector<int>& a, const std::vector<int>& b) {
  int64_t acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += int64_t{a[i]} * b[i];
  return acc;
}

// Scalar re-evaluation of the spectral redistribution chain:
// gap -> fc1 -> relu -> fc2 -> split -> sigmoid/tanh -> affine.
inline void srm_scalar(const std::vector<double>& x, int64_t n, int64_t c, int64_t hw,
                       const std::vector<double>& w1, const std::vector<double>& b1,
                       const std::vector<double>& w2, const std::vector<double>& b2,
                       int64_t mid, std::vector<double>& out,
                       std::vector<double>* k_out = nullptr,
                       std::vector<double>* b_out = nullptr) {
  out.assign(x.size(), 0.0);
  if (k_out) k_out->assign(static_cast<size_t>(n * c), 0.0);
  if (b_out) b_out->assign(static_cast<size_t>(n * c), 0.0);
  for (int64_t in = 0; in < n; ++in) {
    std::vector<double> g(static_cast<size_t>(c), 0.0);
    for (int64_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int64_t j = 0; j < hw; ++j) acc += x[static_cast<size_t>((in * c + ch) * hw + j)];
      g[static_cast<size_t>(ch)] = acc / static_cast<double>(hw);
    }
    std::vector<double> hdn(static_cast<size_t>(mid), 0.0);
    for (int64_t o = 0; o < mid; ++o) {
      double acc = b1[static_cast<size_t>(o)];
      for (int64_t j = 0; j < c; ++j) acc += w1[static_cast<size_t>(o * c + j)] * g[static_cast<size_t>(j)];
      hdn[static_cast<size_t>(o)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> merged(static_cast<size_t>(2 * c), 0.0);
    for (int64_t o = 0; o < 2 * c; ++o) {
      double acc = b2[static_cast<size_t>(o)];
      for (int64_t j = 0; j < mid; ++j)
        acc += w2[static_cast<size_t>(o * mid + j)] * hdn[static_cast<size_t>(j)];
      merged[static_cast<size_t>(o)] = acc;
    }
    for (int64_t ch = 0; ch < c; ++ch) {
      const double kv = 1.0 / (1.0 + std::exp(-merged[static_cast<size_t>(ch)]));
      const double bv = std::tanh(merged[static_cast<size_t>(c + ch)]);
      if (k_out) (*k_out)[static_cast<size_t>(in * c + ch)] = kv;
      if (b_out) (*b_out)[static_cast<size_t>(in * c + ch)] = bv;
      for (int64_t j = 0; j < hw; ++j) {
        const size_t idx = static_cast<size_t>((in * c + ch) * hw + j);
        out[idx] = x[idx] * kv + bv;
      }
    }
  }
}

// Direct evaluation of the real-part Gabor formula at one grid point.
inline double gabor_point(double x, double y, double lambda, double theta, double psi,
                          double gamma_aspect, double sigma) {
  const double xr = x * std::cos(theta) + y * std::sin(theta);
  const double yr = -x * std::sin(theta) + y * std::cos(theta);
  const double env =
      std::exp(-(xr * xr + gamma_aspect * gamma_aspect * yr * yr) / (2.0 * sigma * sigma));
  return env * std::cos(2.0 * 3.14159265358979323846 * xr / lambda + psi);
}

}  // namespace oracle
