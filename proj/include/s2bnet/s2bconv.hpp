#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "s2bnet/autograd.hpp"
#include "s2bnet/binarize.hpp"
#include "s2bnet/bitpack.hpp"
#include "s2bnet/common.hpp"
#include "s2bnet/gabor.hpp"
#include "s2bnet/ops.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b {

// ---------------------------------------------------------------------------
// Spectral redistribution: data-driven per-channel affine before binarization
// ---------------------------------------------------------------------------

template <class T>
struct SrmParamsT {
  TensorT<T> w1, b1;  // C -> C/r
  TensorT<T> w2, b2;  // C/r -> 2C
  int64_t reduction = 4;
};

template <class T>
SrmParamsT<T> make_srm(rng::Engine& g, int64_t channels, int64_t reduction) {
  check_value(reduction >= 1, "srm: reduction must be >= 1");
  check_shape(channels % reduction == 0,
              "srm: channel count " + std::to_string(channels) +
                  " not divisible by reduction " + std::to_string(reduction));
  const int64_t mid = channels / reduction;
  SrmParamsT<T> p;
  p.reduction = reduction;
  p.w1 = TensorT<T>::randn(g, {mid, channels},
                           static_cast<T>(std::sqrt(2.0 / static_cast<double>(channels))));
  p.b1 = TensorT<T>::zeros({mid});
  p.w2 = TensorT<T>::randn(g, {2 * channels, mid},
                           static_cast<T>(std::sqrt(2.0 / static_cast<double>(mid))));
  p.b2 = TensorT<T>::zeros({2 * channels});
  p.w1.set_requires_grad(true);
  p.b1.set_requires_grad(true);
  p.w2.set_requires_grad(true);
  p.b2.set_requires_grad(true);
  return p;
}

/// Squashed per-(sample, channel) gains: scale in (0,1), bias in (-1,1).
template <class T>
std::pair<TensorT<T>, TensorT<T>> srm_gains(TapeT<T>* tape, const TensorT<T>& x,
                                            const SrmParamsT<T>& p) {
  check_shape(x.rank() == 4, "srm: NCHW tensor required");
  const int64_t c = x.dim(1);
  check_shape(p.w1.dim(1) == c, "srm: channel count mismatch with parameters");
  TensorT<T> pooled = ops::global_avg_pool(tape, x);                  // [N,C]
  TensorT<T> hidden = ops::relu(tape, ops::linear(tape, pooled, p.w1, p.b1));
  TensorT<T> merged = ops::linear(tape, hidden, p.w2, p.b2);          // [N,2C]
  TensorT<T> k = ops::slice_channels(tape, merged, 0, c);
  TensorT<T> b = ops::slice_channels(tape, merged, c, 2 * c);
  return {ops::sigmoid(tape, k), ops::tanh_op(tape, b)};
}

/// x * k' + b' with the gains broadcast over H, W.
template <class T>
TensorT<T> srm_redistribute(TapeT<T>* tape, const TensorT<T>& x, const SrmParamsT<T>& p) {
  auto [k, b] = srm_gains(tape, x, p);
  return ops::channel_affine(tape, x, k, b);
}

// ---------------------------------------------------------------------------
// Binarized convolution with straight-through backward
// ---------------------------------------------------------------------------

/// Forward: sign-binarize activations and latent weights, run the packed
/// XNOR-popcount convolution, subsample for stride, rescale by the
/// per-channel mean-absolute weight scale. Backward: tanh surrogate into the
/// activations (and the slope alpha), clip gate into the latent weights, and
/// the exact chain through the weight scale.
template <class T>
TensorT<T> binary_conv_ste(TapeT<T>* tape, const TensorT<T>& x, const TensorT<T>& w_f,
                           const TensorT<T>& alpha, int64_t pad, int64_t stride = 1) {
  check_shape(x.rank() == 4, "binary_conv_ste: input must be [N,Cin,H,W]");
  check_shape(w_f.rank() == 4, "binary_conv_ste: weight must be [Cout,Cin,K,K]");
  check_shape(x.dim(1) == w_f.dim(1), "binary_conv_ste: Cin mismatch");
  check_shape(alpha.numel() == 1, "binary_conv_ste: alpha must be scalar");
  check_value(stride >= 1, "binary_conv_ste: stride must be >= 1");

  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t co = w_f.dim(0), k = w_f.dim(2);

  TensorT<T> xb = sign_binarize(x);
  TensorT<T> wb = sign_binarize(w_f);
  IntTensor y_full = binary_conv2d_packed(xb, wb, pad);
  const int64_t hf = y_full.dim(2), wf = y_full.dim(3);
  const int64_t ho = (hf - 1) / stride + 1, wo = (wf - 1) / stride + 1;

  IntTensor y_int = y_full;
  if (stride > 1) {
    y_int = IntTensor::zeros({n, co, ho, wo});
    for (int64_t p = 0; p < n * co; ++p)
      for (int64_t oh = 0; oh < ho; ++oh)
        for (int64_t ow = 0; ow < wo; ++ow)
          y_int.data()[(p * ho + oh) * wo + ow] =
              y_full.data()[(p * hf + oh * stride) * wf + ow * stride];
  }
  TensorT<T> s = weight_scale(w_f);
  TensorT<T> y = rescale_output(y_int, s);

  if (detail::wants_grad(tape, {&x, &w_f, &alpha})) {
    detail::mark_output(tape, y);
    tape->record([xi = x.impl(), wi = w_f.impl(), ai = alpha.impl(), yi = y.impl(),
                  xbi = xb.impl(), wbi = wb.impl(), yint = y_int.impl(), si = s.impl(),
                  n, ci, co, h, w, k, ho, wo, pad, stride] {
      if (yi->grad.empty()) return;
      const T* gy = yi->grad.data();
      const int64_t fan = ci * k * k;

      // d(loss)/d(scale): the rescale is elementwise in the integer output.
      std::vector<T> gs(static_cast<size_t>(co), T(0));
      if (wi->requires_grad) {
        for (int64_t in = 0; in < n; ++in)
          for (int64_t o = 0; o < co; ++o) {
            const int64_t off = (in * co + o) * ho * wo;
            T acc = T(0);
            for (int64_t j = 0; j < ho * wo; ++j)
              acc += gy[off + j] * static_cast<T>(yint->data[off + j]);
            gs[static_cast<size_t>(o)] += acc;
          }
      }

      if (xi->requires_grad || ai->requires_grad) {
        std::vector<T> gxb(static_cast<size_t>(n * ci * h * w), T(0));
        parallel_for(0, n * ci, [&](int64_t lo, int64_t hi_) {
          for (int64_t nc = lo; nc < hi_; ++nc) {
            const int64_t in = nc / ci, ic = nc % ci;
            T* gplane = gxb.data() + nc * h * w;
            for (int64_t o = 0; o < co; ++o) {
              const T* gyplane = gy + (in * co + o) * ho * wo;
              const T sv = si->data[o];
              for (int64_t kh = 0; kh < k; ++kh) {
                int64_t oh_lo, oh_hi;
                ops::detail::conv_axis_range(ho, h, kh, pad, stride, oh_lo, oh_hi);
                for (int64_t kw = 0; kw < k; ++kw) {
                  const T wv = sv * wbi->data[((o * ci + ic) * k + kh) * k + kw];
                  int64_t ow_lo, ow_hi;
                  ops::detail::conv_axis_range(wo, w, kw, pad, stride, ow_lo, ow_hi);
                  for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                    T* __restrict grow =
                        gplane + (oh * stride + kh - pad) * w + (kw - pad);
                    const T* __restrict gyrow = gyplane + oh * wo;
                    if (stride == 1) {
                      for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                        grow[ow] += wv * gyrow[ow];
                    } else {
                      for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                        grow[ow * stride] += wv * gyrow[ow];
                    }
                  }
                }
              }
            }
          }
        });
        // Straight-through surrogate: d sign(x) ~ d tanh(alpha x).
        const T a = ai->data[0];
        const bool want_x = xi->requires_grad, want_a = ai->requires_grad;
        T* gx = want_x ? xi->ensure_grad().data() : nullptr;
        T acc_a = T(0);
        for (size_t i = 0; i < gxb.size(); ++i) {
          const T t = std::tanh(a * xi->data[i]);
          const T sech2 = T(1) - t * t;
          if (want_x) gx[i] += gxb[i] * a * sech2;
          if (want_a) acc_a += gxb[i] * xi->data[i] * sech2;
        }
        if (want_a) ai->ensure_grad()[0] += acc_a;
      }

      if (wi->requires_grad) {
        auto& gw = wi->ensure_grad();
        parallel_for(0, co, [&](int64_t lo, int64_t hi_) {
          for (int64_t o = lo; o < hi_; ++o) {
            const T sv = si->data[o];
            for (int64_t ic = 0; ic < ci; ++ic)
              for (int64_t kh = 0; kh < k; ++kh) {
                int64_t oh_lo, oh_hi;
                ops::detail::conv_axis_range(ho, h, kh, pad, stride, oh_lo, oh_hi);
                for (int64_t kw = 0; kw < k; ++kw) {
                  int64_t ow_lo, ow_hi;
                  ops::detail::conv_axis_range(wo, w, kw, pad, stride, ow_lo, ow_hi);
                  T acc = T(0);
                  for (int64_t in = 0; in < n; ++in) {
                    const T* gyplane = gy + (in * co + o) * ho * wo;
                    const T* xplane = xbi->data.data() + (in * ci + ic) * h * w;
                    for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                      const T* xrow =
                          xplane + (oh * stride + kh - pad) * w + (kw - pad);
                      const T* gyrow = gyplane + oh * wo;
                      if (stride == 1) {
                        acc += ops::detail::dot_span(gyrow + ow_lo, xrow + ow_lo,
                                                     ow_hi - ow_lo);
                      } else {
                        for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                          acc += gyrow[ow] * xrow[ow * stride];
                      }
                    }
                  }
                  const int64_t wo_idx = ((o * ci + ic) * k + kh) * k + kw;
                  const T wv = wi->data[wo_idx];
                  // Clip gate on the sign path; exact derivative through the
                  // mean-absolute scale.
                  T g = (wv > T(-1) && wv < T(1)) ? acc * sv : T(0);
                  const T sgn = wv > T(0) ? T(1) : (wv < T(0) ? T(-1) : T(0));
                  g += gs[static_cast<size_t>(o)] * sgn / static_cast<T>(fan);
                  gw[static_cast<size_t>(wo_idx)] += g;
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
// Plain binarized conv layer (downsample / upsample / fusion blocks)
// ---------------------------------------------------------------------------

template <class T>
struct PlainBinConvT {
  TensorT<T> w_f;    // [Cout,Cin,K,K]
  TensorT<T> alpha;  // scalar STE slope
  int64_t stride = 1;
  int64_t pad = 0;
};

template <class T>
PlainBinConvT<T> make_plain_bin_conv(rng::Engine& g, int64_t cout, int64_t cin,
                                     int64_t k, int64_t stride) {
  PlainBinConvT<T> conv;
  const double n_in = static_cast<double>(cin * k * k);
  conv.w_f = TensorT<T>::randn(g, {cout, cin, k, k},
                               static_cast<T>(std::sqrt(2.0 / n_in)));
  conv.w_f.set_requires_grad(true);
  conv.alpha = TensorT<T>::scalar(T(1)).set_requires_grad(true);
  conv.stride = stride;
  conv.pad = k / 2;
  return conv;
}

template <class T>
TensorT<T> plain_bin_conv_forward(TapeT<T>* tape, const TensorT<T>& x,
                                  const PlainBinConvT<T>& conv) {
  return binary_conv_ste(tape, x, conv.w_f, conv.alpha, conv.pad, conv.stride);
}

// ---------------------------------------------------------------------------
// S2B-Conv unit
// ---------------------------------------------------------------------------

/// One spatial-spectral binarized convolution: redistribution (learned, or a
/// fixed random per-channel affine in the ablation), sign/sign binarized 3x3
/// convolution with weight rescaling, RPReLU, and a residual sum with the
/// full-precision input.
template <class T>
struct S2BConvT {
  TensorT<T> w_f;    // [C,C,K,K] latent weights
  TensorT<T> alpha;  // scalar STE slope
  SrmParamsT<T> srm;
  TensorT<T> chan_k, chan_b;  // per-channel affine when SRM is disabled
  RpReluParamsT<T> act;
  bool use_srm = true;
  int64_t pad = 1;
};

template <class T>
S2BConvT<T> make_s2bconv(rng::Engine& g, int64_t channels, int64_t k,
                         int64_t srm_reduction, bool use_srm, bool use_gsfa,
                         const GaborSpec& spec) {
  S2BConvT<T> unit;
  unit.pad = k / 2;
  unit.use_srm = use_srm;
  if (use_gsfa) {
    unit.w_f = gabor_init_bank<T>(channels, channels, k, spec, g());
  } else {
    const double n_in = static_cast<double>(channels * k * k);
    unit.w_f = TensorT<T>::randn(g, {channels, channels, k, k},
                                 static_cast<T>(std::sqrt(2.0 / n_in)));
  }
  unit.w_f.set_requires_grad(true);
  unit.alpha = TensorT<T>::scalar(T(1)).set_requires_grad(true);
  if (use_srm) {
    unit.srm = make_srm<T>(g, channels, srm_reduction);
    unit.chan_k = TensorT<T>::zeros({0});
    unit.chan_b = TensorT<T>::zeros({0});
  } else {
    // Ablation: randomly initialized, input-independent scaling and bias.
    unit.chan_k = TensorT<T>::uniform(g, {channels}, T(0), T(1));
    unit.chan_b = TensorT<T>::uniform(g, {channels}, T(-1), T(1));
    unit.chan_k.set_requires_grad(true);
    unit.chan_b.set_requires_grad(true);
  }
  unit.act = make_rprelu<T>(channels);
  return unit;
}

template <class T>
TensorT<T> s2bconv_forward(TapeT<T>* tape, const TensorT<T>& x, const S2BConvT<T>& p) {
  check_shape(x.rank() == 4, "s2bconv: NCHW tensor required");
  check_shape(x.dim(1) == p.w_f.dim(0) && x.dim(1) == p.w_f.dim(1),
              "s2bconv: residual requires Cin == Cout == C");
  TensorT<T> xr = p.use_srm ? srm_redistribute(tape, x, p.srm)
                            : ops::channel_affine_const(tape, x, p.chan_k, p.chan_b);
  TensorT<T> y = binary_conv_ste(tape, xr, p.w_f, p.alpha, p.pad, 1);
  TensorT<T> adjusted = rprelu(tape, y, p.act);
  return ops::add(tape, x, adjusted);
}

}  // namespace s2b
