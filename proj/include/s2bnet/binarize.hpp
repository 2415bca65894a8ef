#pragma once

#include <cmath>
#include <utility>

#include "s2bnet/autograd.hpp"
#include "s2bnet/common.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b {

/// Sign binarization: +1 where x > 0, -1 where x <= 0. Zero maps to -1.
template <class T>
TensorT<T> sign_binarize(const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::zeros(x.shape());
  const T* xd = x.data();
  T* yd = y.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = xd[i] > T(0) ? T(1) : T(-1);
  return y;
}

/// Training-time surrogate for the sign of activations: the forward stays the
/// exact sign, the backward is the derivative of tanh(alpha * x).
/// Returns (grad_x, grad_alpha) for the given upstream gradient.
template <class T>
std::pair<TensorT<T>, T> sign_backward_tanh(const TensorT<T>& x,
                                            const TensorT<T>& upstream, T alpha) {
  check_shape(x.same_shape(upstream), "sign_backward_tanh: shape mismatch");
  check_value(alpha > T(0), "sign_backward_tanh: alpha must be positive");
  TensorT<T> grad_x = TensorT<T>::zeros(x.shape());
  T grad_alpha = T(0);
  const T* xd = x.data();
  const T* ud = upstream.data();
  T* gd = grad_x.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T t = std::tanh(alpha * xd[i]);
    const T sech2 = T(1) - t * t;
    gd[i] = ud[i] * alpha * sech2;
    grad_alpha += ud[i] * xd[i] * sech2;
  }
  return {grad_x, grad_alpha};
}

/// Straight-through gate for the sign of weights: the upstream gradient
/// passes where |w| < 1 and is zeroed on the saturated branches |w| >= 1.
template <class T>
TensorT<T> clip_ste(const TensorT<T>& w, const TensorT<T>& upstream) {
  check_shape(w.same_shape(upstream), "clip_ste: shape mismatch");
  TensorT<T> grad_w = TensorT<T>::zeros(w.shape());
  const T* wd = w.data();
  const T* ud = upstream.data();
  T* gd = grad_w.data();
  const int64_t n = w.numel();
  for (int64_t i = 0; i < n; ++i)
    gd[i] = (wd[i] > T(-1) && wd[i] < T(1)) ? ud[i] : T(0);
  return grad_w;
}

/// Per-output-channel scale: mean absolute value of the latent weights.
template <class T>
TensorT<T> weight_scale(const TensorT<T>& w_f) {
  check_shape(w_f.rank() == 4, "weight_scale: weight must be [Cout,Cin,K,K]");
  const int64_t co = w_f.dim(0);
  const int64_t fan = w_f.dim(1) * w_f.dim(2) * w_f.dim(3);
  check_shape(fan > 0, "weight_scale: empty kernel");
  TensorT<T> s = TensorT<T>::zeros({co});
  const T* wd = w_f.data();
  for (int64_t o = 0; o < co; ++o) {
    T acc = T(0);
    for (int64_t j = 0; j < fan; ++j) acc += std::abs(wd[o * fan + j]);
    s.data()[o] = acc / static_cast<T>(fan);
  }
  return s;
}

template <class T>
struct RpReluParamsT {
  TensorT<T> gamma;  // [C] input shift
  TensorT<T> zeta;   // [C] threshold / output shift
  TensorT<T> beta;   // [C] slope below the threshold
};

template <class T>
RpReluParamsT<T> make_rprelu(int64_t channels, T beta_init = T(0.25)) {
  return {TensorT<T>::zeros({channels}).set_requires_grad(true),
          TensorT<T>::zeros({channels}).set_requires_grad(true),
          TensorT<T>::full({channels}, beta_init).set_requires_grad(true)};
}

/// Per-channel thresholded activation:
///   y - gamma + zeta        where y > zeta
///   beta*(y - gamma) + zeta where y <= zeta
template <class T>
TensorT<T> rprelu(TapeT<T>* tape, const TensorT<T>& y, const RpReluParamsT<T>& p) {
  check_shape(y.rank() == 4, "rprelu: NCHW tensor required");
  const int64_t n = y.dim(0), c = y.dim(1), hw = y.dim(2) * y.dim(3);
  check_shape(p.gamma.rank() == 1 && p.gamma.dim(0) == c,
              "rprelu: parameter length must equal channel count");
  check_shape(p.zeta.same_shape(p.gamma) && p.beta.same_shape(p.gamma),
              "rprelu: parameter shape mismatch");
  TensorT<T> out = TensorT<T>::zeros(y.shape());
  for (int64_t i = 0; i < n * c; ++i) {
    const int64_t ch = i % c;
    const T g = p.gamma.data()[ch], z = p.zeta.data()[ch], b = p.beta.data()[ch];
    const T* yp = y.data() + i * hw;
    T* op = out.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j)
      op[j] = yp[j] > z ? yp[j] - g + z : b * (yp[j] - g) + z;
  }
  if (detail::wants_grad(tape, {&y, &p.gamma, &p.zeta, &p.beta})) {
    detail::mark_output(tape, out);
    tape->record([yi = y.impl(), gi = p.gamma.impl(), zi = p.zeta.impl(),
                  bi = p.beta.impl(), oi = out.impl(), n, c, hw] {
      if (oi->grad.empty()) return;
      for (int64_t i = 0; i < n * c; ++i) {
        const int64_t ch = i % c;
        const T g = gi->data[ch], z = zi->data[ch], b = bi->data[ch];
        const T* yp = yi->data.data() + i * hw;
        const T* go = oi->grad.data() + i * hw;
        T acc_g = T(0), acc_z = T(0), acc_b = T(0);
        if (yi->requires_grad) {
          auto& gy = yi->ensure_grad();
          T* gyp = gy.data() + i * hw;
          for (int64_t j = 0; j < hw; ++j)
            gyp[j] += yp[j] > z ? go[j] : go[j] * b;
        }
        for (int64_t j = 0; j < hw; ++j) {
          if (yp[j] > z) {
            acc_g -= go[j];
          } else {
            acc_g -= go[j] * b;
            acc_b += go[j] * (yp[j] - g);
          }
          acc_z += go[j];
        }
        if (gi->requires_grad) gi->ensure_grad()[ch] += acc_g;
        if (zi->requires_grad) zi->ensure_grad()[ch] += acc_z;
        if (bi->requires_grad) bi->ensure_grad()[ch] += acc_b;
      }
    });
  }
  return out;
}

}  // namespace s2b
