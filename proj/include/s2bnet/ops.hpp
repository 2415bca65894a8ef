#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "s2bnet/autograd.hpp"
#include "s2bnet/common.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b::ops {

namespace detail {

using s2b::detail::mark_output;
using s2b::detail::wants_grad;

// Fixed-order 8-lane dot product. The lane layout vectorizes under strict
// IEEE semantics and the summation order never depends on thread count.
template <class T>
T dot_span(const T* a, const T* b, int64_t n) {
  T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  T acc = T(0);
  for (; i < n; ++i) acc += a[i] * b[i];
  for (int l = 0; l < 8; ++l) acc += lanes[l];
  return acc;
}

// Valid output range [lo, hi) along one axis so that the source index
// o*stride + k - pad stays inside [0, extent).
inline void conv_axis_range(int64_t out_extent, int64_t in_extent, int64_t k,
                            int64_t pad, int64_t stride, int64_t& lo, int64_t& hi) {
  const int64_t a = pad - k;  // lowest o has o*stride >= a
  lo = (a <= 0) ? 0 : (a + stride - 1) / stride;
  const int64_t top = in_extent - 1 - k + pad;
  hi = (top < 0) ? 0 : std::min(out_extent, top / stride + 1);
  if (hi < lo) hi = lo;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> relu(TapeT<T>* tape, const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const T* xd = x.data();
  T* yd = y.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = xd[i] > T(0) ? xd[i] : T(0);
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl()] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i)
        if (xi->data[i] > T(0)) gx[i] += yi->grad[i];
    });
  }
  return y;
}

template <class T>
TensorT<T> sigmoid(TapeT<T>* tape, const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const T* xd = x.data();
  T* yd = y.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i)
    yd[i] = T(1) / (T(1) + std::exp(-xd[i]));
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl()] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) {
        const T s = yi->data[i];
        gx[i] += yi->grad[i] * s * (T(1) - s);
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> tanh_op(TapeT<T>* tape, const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const T* xd = x.data();
  T* yd = y.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = std::tanh(xd[i]);
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl()] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) {
        const T t = yi->data[i];
        gx[i] += yi->grad[i] * (T(1) - t * t);
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> add(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  check_shape(a.same_shape(b), "add: shape mismatch " + shape_str(a.shape()) +
                                   " vs " + shape_str(b.shape()));
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  const T* ad = a.data();
  const T* bd = b.data();
  T* yd = y.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] + bd[i];
  if (detail::wants_grad(tape, {&a, &b})) {
    detail::mark_output(tape, y);
    tape->record([ai = a.impl(), bi = b.impl(), yi = y.impl()] {
      if (yi->grad.empty()) return;
      if (ai->requires_grad) {
        auto& ga = ai->ensure_grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += yi->grad[i];
      }
      if (bi->requires_grad) {
        auto& gb = bi->ensure_grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += yi->grad[i];
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> mul(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  check_shape(a.same_shape(b), "mul: shape mismatch " + shape_str(a.shape()) +
                                   " vs " + shape_str(b.shape()));
  TensorT<T> y = TensorT<T>::zeros(a.shape());
  const T* ad = a.data();
  const T* bd = b.data();
  T* yd = y.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] * bd[i];
  if (detail::wants_grad(tape, {&a, &b})) {
    detail::mark_output(tape, y);
    tape->record([ai = a.impl(), bi = b.impl(), yi = y.impl()] {
      if (yi->grad.empty()) return;
      if (ai->requires_grad) {
        auto& ga = ai->ensure_grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += yi->grad[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& gb = bi->ensure_grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += yi->grad[i] * ai->data[i];
      }
    });
  }
  return y;
}

// Multiply by a compile-time constant (not a learnable parameter).
template <class T>
TensorT<T> scale(TapeT<T>* tape, const TensorT<T>& x, T c) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const T* xd = x.data();
  T* yd = y.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = xd[i] * c;
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl(), c] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += yi->grad[i] * c;
    });
  }
  return y;
}

template <class T>
TensorT<T> sum(TapeT<T>* tape, const TensorT<T>& x) {
  T acc = T(0);
  const T* xd = x.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += xd[i];
  TensorT<T> y = TensorT<T>::scalar(acc);
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl()] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      const T g = yi->grad[0];
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Channel structure ops (dim 1 is the channel axis for rank >= 2)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> concat_channels(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  check_shape(a.rank() >= 2 && a.rank() == b.rank(),
              "concat_channels: rank >= 2 tensors required");
  check_shape(a.dim(0) == b.dim(0), "concat_channels: batch mismatch");
  int64_t inner = 1;
  for (int64_t d = 2; d < a.rank(); ++d) {
    check_shape(a.dim(d) == b.dim(d), "concat_channels: spatial mismatch");
    inner *= a.dim(d);
  }
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Shape out_shape = a.shape();
  out_shape[1] = ca + cb;
  TensorT<T> y = TensorT<T>::zeros(out_shape);
  const int64_t block_a = ca * inner, block_b = cb * inner;
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * block_a, block_a, y.data() + i * (block_a + block_b));
    std::copy_n(b.data() + i * block_b, block_b,
                y.data() + i * (block_a + block_b) + block_a);
  }
  if (detail::wants_grad(tape, {&a, &b})) {
    detail::mark_output(tape, y);
    tape->record([ai = a.impl(), bi = b.impl(), yi = y.impl(), n, block_a, block_b] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n; ++i) {
        const T* gy = yi->grad.data() + i * (block_a + block_b);
        if (ai->requires_grad) {
          auto& ga = ai->ensure_grad();
          for (int64_t j = 0; j < block_a; ++j) ga[i * block_a + j] += gy[j];
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (int64_t j = 0; j < block_b; ++j) gb[i * block_b + j] += gy[block_a + j];
        }
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> slice_channels(TapeT<T>* tape, const TensorT<T>& x, int64_t c0, int64_t c1) {
  check_shape(x.rank() >= 2, "slice_channels: rank >= 2 tensor required");
  const int64_t c = x.dim(1);
  check_shape(0 <= c0 && c0 < c1 && c1 <= c, "slice_channels: bad channel range");
  int64_t inner = 1;
  for (int64_t d = 2; d < x.rank(); ++d) inner *= x.dim(d);
  const int64_t n = x.dim(0);
  Shape out_shape = x.shape();
  out_shape[1] = c1 - c0;
  TensorT<T> y = TensorT<T>::zeros(out_shape);
  const int64_t in_block = c * inner, out_block = (c1 - c0) * inner;
  for (int64_t i = 0; i < n; ++i)
    std::copy_n(x.data() + i * in_block + c0 * inner, out_block,
                y.data() + i * out_block);
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl(), n, in_block, out_block, c0, inner] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const T* gy = yi->grad.data() + i * out_block;
        T* dst = gx.data() + i * in_block + c0 * inner;
        for (int64_t j = 0; j < out_block; ++j) dst[j] += gy[j];
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> global_avg_pool(TapeT<T>* tape, const TensorT<T>& x) {
  check_shape(x.rank() == 4, "global_avg_pool: NCHW tensor required");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_shape(hw > 0, "global_avg_pool: empty spatial extent");
  TensorT<T> y = TensorT<T>::zeros({n, c});
  const T* xd = x.data();
  T* yd = y.data();
  for (int64_t i = 0; i < n * c; ++i) {
    T acc = T(0);
    const T* p = xd + i * hw;
    for (int64_t j = 0; j < hw; ++j) acc += p[j];
    yd[i] = acc / static_cast<T>(hw);
  }
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl(), n, c, hw] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (int64_t i = 0; i < n * c; ++i) {
        const T g = yi->grad[i] / static_cast<T>(hw);
        T* p = gx.data() + i * hw;
        for (int64_t j = 0; j < hw; ++j) p[j] += g;
      }
    });
  }
  return y;
}

// Per-(sample, channel) affine broadcast over H, W: y = x * k + b.
template <class T>
TensorT<T> channel_affine(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& k,
                          const TensorT<T>& b) {
  check_shape(x.rank() == 4, "channel_affine: NCHW tensor required");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_shape(k.rank() == 2 && k.dim(0) == n && k.dim(1) == c,
              "channel_affine: scale must be [N,C]");
  check_shape(b.same_shape(k), "channel_affine: scale/bias shape mismatch");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  for (int64_t i = 0; i < n * c; ++i) {
    const T kv = k.data()[i], bv = b.data()[i];
    const T* xp = x.data() + i * hw;
    T* yp = y.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) yp[j] = xp[j] * kv + bv;
  }
  if (detail::wants_grad(tape, {&x, &k, &b})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), ki = k.impl(), bi = b.impl(), yi = y.impl(), n, c, hw] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n * c; ++i) {
        const T* gy = yi->grad.data() + i * hw;
        if (xi->requires_grad) {
          auto& gx = xi->ensure_grad();
          const T kv = ki->data[i];
          T* gxp = gx.data() + i * hw;
          for (int64_t j = 0; j < hw; ++j) gxp[j] += gy[j] * kv;
        }
        if (ki->requires_grad) {
          auto& gk = ki->ensure_grad();
          const T* xp = xi->data.data() + i * hw;
          T acc = T(0);
          for (int64_t j = 0; j < hw; ++j) acc += gy[j] * xp[j];
          gk[i] += acc;
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          T acc = T(0);
          for (int64_t j = 0; j < hw; ++j) acc += gy[j];
          gb[i] += acc;
        }
      }
    });
  }
  return y;
}

// Per-channel affine with learnable [C] parameters shared across the batch.
template <class T>
TensorT<T> channel_affine_const(TapeT<T>* tape, const TensorT<T>& x,
                                const TensorT<T>& k, const TensorT<T>& b) {
  check_shape(x.rank() == 4, "channel_affine_const: NCHW tensor required");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_shape(k.rank() == 1 && k.dim(0) == c, "channel_affine_const: scale must be [C]");
  check_shape(b.same_shape(k), "channel_affine_const: scale/bias shape mismatch");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  for (int64_t i = 0; i < n * c; ++i) {
    const T kv = k.data()[i % c], bv = b.data()[i % c];
    const T* xp = x.data() + i * hw;
    T* yp = y.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) yp[j] = xp[j] * kv + bv;
  }
  if (detail::wants_grad(tape, {&x, &k, &b})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), ki = k.impl(), bi = b.impl(), yi = y.impl(), n, c, hw] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n * c; ++i) {
        const int64_t ch = i % c;
        const T* gy = yi->grad.data() + i * hw;
        if (xi->requires_grad) {
          auto& gx = xi->ensure_grad();
          const T kv = ki->data[ch];
          T* gxp = gx.data() + i * hw;
          for (int64_t j = 0; j < hw; ++j) gxp[j] += gy[j] * kv;
        }
        if (ki->requires_grad) {
          auto& gk = ki->ensure_grad();
          const T* xp = xi->data.data() + i * hw;
          T acc = T(0);
          for (int64_t j = 0; j < hw; ++j) acc += gy[j] * xp[j];
          gk[ch] += acc;
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          T acc = T(0);
          for (int64_t j = 0; j < hw; ++j) acc += gy[j];
          gb[ch] += acc;
        }
      }
    });
  }
  return y;
}

template <class T>
TensorT<T> add_channel_bias(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& b) {
  check_shape(x.rank() == 4, "add_channel_bias: NCHW tensor required");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_shape(b.rank() == 1 && b.dim(0) == c, "add_channel_bias: bias must be [C]");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  for (int64_t i = 0; i < n * c; ++i) {
    const T bv = b.data()[i % c];
    const T* xp = x.data() + i * hw;
    T* yp = y.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) yp[j] = xp[j] + bv;
  }
  if (detail::wants_grad(tape, {&x, &b})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), bi = b.impl(), yi = y.impl(), n, c, hw] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n * c; ++i) {
        const T* gy = yi->grad.data() + i * hw;
        if (xi->requires_grad) {
          auto& gx = xi->ensure_grad();
          T* gxp = gx.data() + i * hw;
          for (int64_t j = 0; j < hw; ++j) gxp[j] += gy[j];
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          T acc = T(0);
          for (int64_t j = 0; j < hw; ++j) acc += gy[j];
          gb[i % c] += acc;
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Linear and normalization
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> linear(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w,
                  const TensorT<T>& b) {
  check_shape(x.rank() == 2, "linear: input must be [N,Din]");
  check_shape(w.rank() == 2, "linear: weight must be [Dout,Din]");
  const int64_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  check_shape(w.dim(1) == din, "linear: Din mismatch between input and weight");
  check_shape(b.rank() == 1 && b.dim(0) == dout, "linear: bias must be [Dout]");
  TensorT<T> y = TensorT<T>::zeros({n, dout});
  for (int64_t i = 0; i < n; ++i) {
    const T* xp = x.data() + i * din;
    T* yp = y.data() + i * dout;
    for (int64_t o = 0; o < dout; ++o) {
      const T* wp = w.data() + o * din;
      T acc = b.data()[o];
      for (int64_t j = 0; j < din; ++j) acc += xp[j] * wp[j];
      yp[o] = acc;
    }
  }
  if (detail::wants_grad(tape, {&x, &w, &b})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), wi = w.impl(), bi = b.impl(), yi = y.impl(), n, din,
                  dout] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n; ++i) {
        const T* gy = yi->grad.data() + i * dout;
        if (xi->requires_grad) {
          auto& gx = xi->ensure_grad();
          T* gxp = gx.data() + i * din;
          for (int64_t o = 0; o < dout; ++o) {
            const T g = gy[o];
            const T* wp = wi->data.data() + o * din;
            for (int64_t j = 0; j < din; ++j) gxp[j] += g * wp[j];
          }
        }
        if (wi->requires_grad) {
          auto& gw = wi->ensure_grad();
          const T* xp = xi->data.data() + i * din;
          for (int64_t o = 0; o < dout; ++o) {
            const T g = gy[o];
            T* gwp = gw.data() + o * din;
            for (int64_t j = 0; j < din; ++j) gwp[j] += g * xp[j];
          }
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (int64_t o = 0; o < dout; ++o) gb[o] += gy[o];
        }
      }
    });
  }
  return y;
}

// Per-sample normalization over (C,H,W) followed by a per-channel affine.
template <class T>
TensorT<T> layer_norm(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& gamma,
                      const TensorT<T>& beta, T eps = T(1e-5)) {
  check_shape(x.rank() == 4, "layer_norm: NCHW tensor required");
  check_value(eps > T(0), "layer_norm: eps must be positive");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const int64_t m = c * hw;
  check_shape(gamma.rank() == 1 && gamma.dim(0) == c, "layer_norm: gamma must be [C]");
  check_shape(beta.same_shape(gamma), "layer_norm: beta must match gamma");
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(n * m));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const T* xp = x.data() + i * m;
    T mean = T(0);
    for (int64_t j = 0; j < m; ++j) mean += xp[j];
    mean /= static_cast<T>(m);
    T var = T(0);
    for (int64_t j = 0; j < m; ++j) {
      const T d = xp[j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(m);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(i)] = is;
    T* xh = xhat->data() + i * m;
    T* yp = y.data() + i * m;
    for (int64_t ch = 0; ch < c; ++ch) {
      const T g = gamma.data()[ch], bv = beta.data()[ch];
      for (int64_t j = 0; j < hw; ++j) {
        const int64_t k = ch * hw + j;
        xh[k] = (xp[k] - mean) * is;
        yp[k] = g * xh[k] + bv;
      }
    }
  }
  if (detail::wants_grad(tape, {&x, &gamma, &beta})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), yi = y.impl(),
                  xhat, inv_std, n, c, hw, m] {
      if (yi->grad.empty()) return;
      for (int64_t i = 0; i < n; ++i) {
        const T* gy = yi->grad.data() + i * m;
        const T* xh = xhat->data() + i * m;
        if (gi->requires_grad) {
          auto& gg = gi->ensure_grad();
          for (int64_t ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (int64_t j = 0; j < hw; ++j) acc += gy[ch * hw + j] * xh[ch * hw + j];
            gg[ch] += acc;
          }
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (int64_t ch = 0; ch < c; ++ch) {
            T acc = T(0);
            for (int64_t j = 0; j < hw; ++j) acc += gy[ch * hw + j];
            gb[ch] += acc;
          }
        }
        if (xi->requires_grad) {
          auto& gx = xi->ensure_grad();
          T m1 = T(0), m2 = T(0);
          for (int64_t ch = 0; ch < c; ++ch) {
            const T g = gi->data[ch];
            for (int64_t j = 0; j < hw; ++j) {
              const int64_t k = ch * hw + j;
              m1 += gy[k] * g;
              m2 += gy[k] * g * xh[k];
            }
          }
          m1 /= static_cast<T>(m);
          m2 /= static_cast<T>(m);
          const T is = (*inv_std)[static_cast<size_t>(i)];
          T* gxp = gx.data() + i * m;
          for (int64_t ch = 0; ch < c; ++ch) {
            const T g = gi->data[ch];
            for (int64_t j = 0; j < hw; ++j) {
              const int64_t k = ch * hw + j;
              gxp[k] += is * (gy[k] * g - m1 - xh[k] * m2);
            }
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Full-precision convolution (cross-correlation, zero padding)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> conv2d_fp(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w,
                     int64_t stride, int64_t pad) {
  check_shape(x.rank() == 4, "conv2d_fp: input must be [N,Cin,H,W]");
  check_shape(w.rank() == 4, "conv2d_fp: weight must be [Cout,Cin,K,K]");
  check_shape(x.dim(1) == w.dim(1), "conv2d_fp: Cin mismatch, input has " +
                                        std::to_string(x.dim(1)) + " weight expects " +
                                        std::to_string(w.dim(1)));
  check_shape(w.dim(2) == w.dim(3), "conv2d_fp: kernel must be square");
  const int64_t k = w.dim(2);
  check_value(k % 2 == 1, "conv2d_fp: kernel size must be odd");
  check_value(pad >= 0, "conv2d_fp: pad must be >= 0");
  check_value(stride >= 1, "conv2d_fp: stride must be >= 1");
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(0);
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (wd + 2 * pad - k) / stride + 1;
  check_shape(ho >= 1 && wo >= 1, "conv2d_fp: output would be empty");
  TensorT<T> y = TensorT<T>::zeros({n, co, ho, wo});

  const T* xd = x.data();
  const T* wdat = w.data();
  T* yd = y.data();
  parallel_for(0, n * co, [&](int64_t lo_idx, int64_t hi_idx) {
    for (int64_t nc = lo_idx; nc < hi_idx; ++nc) {
      const int64_t in = nc / co, oc = nc % co;
      T* yplane = yd + nc * ho * wo;
      for (int64_t ic = 0; ic < ci; ++ic) {
        const T* xplane = xd + (in * ci + ic) * h * wd;
        for (int64_t kh = 0; kh < k; ++kh) {
          int64_t oh_lo, oh_hi;
          detail::conv_axis_range(ho, h, kh, pad, stride, oh_lo, oh_hi);
          for (int64_t kw = 0; kw < k; ++kw) {
            const T wv = wdat[((oc * ci + ic) * k + kh) * k + kw];
            int64_t ow_lo, ow_hi;
            detail::conv_axis_range(wo, wd, kw, pad, stride, ow_lo, ow_hi);
            for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
              const T* __restrict xrow =
                  xplane + (oh * stride + kh - pad) * wd + (kw - pad);
              T* __restrict yrow = yplane + oh * wo;
              if (stride == 1) {
                for (int64_t ow = ow_lo; ow < ow_hi; ++ow) yrow[ow] += wv * xrow[ow];
              } else {
                for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                  yrow[ow] += wv * xrow[ow * stride];
              }
            }
          }
        }
      }
    }
  });

  if (detail::wants_grad(tape, {&x, &w})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), wi = w.impl(), yi = y.impl(), n, ci, co, h, wd, k, ho,
                  wo, stride, pad] {
      if (yi->grad.empty()) return;
      const T* gy = yi->grad.data();
      if (xi->requires_grad) {
        auto& gx = xi->ensure_grad();
        T* gxd = gx.data();
        parallel_for(0, n * ci, [&](int64_t lo_idx, int64_t hi_idx) {
          for (int64_t nc = lo_idx; nc < hi_idx; ++nc) {
            const int64_t in = nc / ci, ic = nc % ci;
            T* gxplane = gxd + nc * h * wd;
            for (int64_t oc = 0; oc < co; ++oc) {
              const T* gyplane = gy + (in * co + oc) * ho * wo;
              for (int64_t kh = 0; kh < k; ++kh) {
                int64_t oh_lo, oh_hi;
                detail::conv_axis_range(ho, h, kh, pad, stride, oh_lo, oh_hi);
                for (int64_t kw = 0; kw < k; ++kw) {
                  const T wv = wi->data[((oc * ci + ic) * k + kh) * k + kw];
                  int64_t ow_lo, ow_hi;
                  detail::conv_axis_range(wo, wd, kw, pad, stride, ow_lo, ow_hi);
                  for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                    T* __restrict gxrow =
                        gxplane + (oh * stride + kh - pad) * wd + (kw - pad);
                    const T* __restrict gyrow = gyplane + oh * wo;
                    if (stride == 1) {
                      for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                        gxrow[ow] += wv * gyrow[ow];
                    } else {
                      for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                        gxrow[ow * stride] += wv * gyrow[ow];
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (wi->requires_grad) {
        auto& gw = wi->ensure_grad();
        T* gwd = gw.data();
        parallel_for(0, co, [&](int64_t lo_idx, int64_t hi_idx) {
          for (int64_t oc = lo_idx; oc < hi_idx; ++oc) {
            for (int64_t in = 0; in < n; ++in) {
              const T* gyplane = gy + (in * co + oc) * ho * wo;
              for (int64_t ic = 0; ic < ci; ++ic) {
                const T* xplane = xi->data.data() + (in * ci + ic) * h * wd;
                for (int64_t kh = 0; kh < k; ++kh) {
                  int64_t oh_lo, oh_hi;
                  detail::conv_axis_range(ho, h, kh, pad, stride, oh_lo, oh_hi);
                  for (int64_t kw = 0; kw < k; ++kw) {
                    int64_t ow_lo, ow_hi;
                    detail::conv_axis_range(wo, wd, kw, pad, stride, ow_lo, ow_hi);
                    T acc = T(0);
                    for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                      const T* xrow =
                          xplane + (oh * stride + kh - pad) * wd + (kw - pad);
                      const T* gyrow = gyplane + oh * wo;
                      if (stride == 1) {
                        acc += detail::dot_span(gyrow + ow_lo, xrow + ow_lo,
                                                ow_hi - ow_lo);
                      } else {
                        for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                          acc += gyrow[ow] * xrow[ow * stride];
                      }
                    }
                    gwd[((oc * ci + ic) * k + kh) * k + kw] += acc;
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Bilinear x2 upsampling, half-pixel centers
// ---------------------------------------------------------------------------

namespace detail {

struct LerpTap {
  int64_t i0, i1;
  double f;  // weight of i1
};

inline std::vector<LerpTap> bilinear_taps(int64_t in_extent) {
  std::vector<LerpTap> taps(static_cast<size_t>(2 * in_extent));
  for (int64_t o = 0; o < 2 * in_extent; ++o) {
    const double s = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    const int64_t i0f = static_cast<int64_t>(std::floor(s));
    const double f = s - static_cast<double>(i0f);
    const int64_t i0 = std::clamp<int64_t>(i0f, 0, in_extent - 1);
    const int64_t i1 = std::clamp<int64_t>(i0f + 1, 0, in_extent - 1);
    taps[static_cast<size_t>(o)] = {i0, i1, f};
  }
  return taps;
}

}  // namespace detail

template <class T>
TensorT<T> bilinear_upsample2x(TapeT<T>* tape, const TensorT<T>& x) {
  check_shape(x.rank() == 4, "bilinear_upsample2x: NCHW tensor required");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check_shape(h >= 1 && w >= 1, "bilinear_upsample2x: empty input");
  const auto rows = detail::bilinear_taps(h);
  const auto cols = detail::bilinear_taps(w);
  TensorT<T> y = TensorT<T>::zeros({n, c, 2 * h, 2 * w});
  for (int64_t p = 0; p < n * c; ++p) {
    const T* xp = x.data() + p * h * w;
    T* yp = y.data() + p * 4 * h * w;
    for (int64_t oy = 0; oy < 2 * h; ++oy) {
      const auto& rt = rows[static_cast<size_t>(oy)];
      const T fy = static_cast<T>(rt.f);
      const T* r0 = xp + rt.i0 * w;
      const T* r1 = xp + rt.i1 * w;
      T* yrow = yp + oy * 2 * w;
      for (int64_t ox = 0; ox < 2 * w; ++ox) {
        const auto& ct = cols[static_cast<size_t>(ox)];
        const T fx = static_cast<T>(ct.f);
        const T top = r0[ct.i0] * (T(1) - fx) + r0[ct.i1] * fx;
        const T bot = r1[ct.i0] * (T(1) - fx) + r1[ct.i1] * fx;
        yrow[ox] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  if (detail::wants_grad(tape, {&x})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), yi = y.impl(), rows, cols, n, c, h, w] {
      if (yi->grad.empty() || !xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (int64_t p = 0; p < n * c; ++p) {
        T* gxp = gx.data() + p * h * w;
        const T* gyp = yi->grad.data() + p * 4 * h * w;
        for (int64_t oy = 0; oy < 2 * h; ++oy) {
          const auto& rt = rows[static_cast<size_t>(oy)];
          const T fy = static_cast<T>(rt.f);
          const T* gyrow = gyp + oy * 2 * w;
          for (int64_t ox = 0; ox < 2 * w; ++ox) {
            const auto& ct = cols[static_cast<size_t>(ox)];
            const T fx = static_cast<T>(ct.f);
            const T g = gyrow[ox];
            gxp[rt.i0 * w + ct.i0] += g * (T(1) - fy) * (T(1) - fx);
            gxp[rt.i0 * w + ct.i1] += g * (T(1) - fy) * fx;
            gxp[rt.i1 * w + ct.i0] += g * fy * (T(1) - fx);
            gxp[rt.i1 * w + ct.i1] += g * fy * fx;
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> l1_loss(TapeT<T>* tape, const TensorT<T>& pred, const TensorT<T>& target) {
  check_shape(pred.same_shape(target), "l1_loss: shape mismatch");
  const int64_t n = pred.numel();
  check_shape(n > 0, "l1_loss: empty tensors");
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i)
    acc += std::abs(pred.data()[i] - target.data()[i]);
  TensorT<T> y = TensorT<T>::scalar(acc / static_cast<T>(n));
  if (detail::wants_grad(tape, {&pred, &target})) {
    detail::mark_output(tape, y);
    tape->record([pi = pred.impl(), ti = target.impl(), yi = y.impl(), n] {
      if (yi->grad.empty()) return;
      const T g = yi->grad[0] / static_cast<T>(n);
      for (int64_t i = 0; i < n; ++i) {
        const T d = pi->data[i] - ti->data[i];
        const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
        if (pi->requires_grad) pi->ensure_grad()[i] += s;
        if (ti->requires_grad) ti->ensure_grad()[i] -= s;
      }
    });
  }
  return y;
}

}  // namespace s2b::ops
