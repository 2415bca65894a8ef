#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b {

/// Adam moment buffers, one pair per parameter, in enumeration order.
struct AdamState {
  int64_t t = 0;
  std::vector<std::vector<float>> m, v;
};

inline AdamState make_adam_state(const std::vector<Tensor*>& params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor* p : params) {
    state.m.emplace_back(static_cast<size_t>(p->numel()), 0.0f);
    state.v.emplace_back(static_cast<size_t>(p->numel()), 0.0f);
  }
  return state;
}

/// One bias-corrected Adam step. Returns false and leaves parameters and
/// moments untouched if any gradient element is non-finite (the step is
/// rejected and the caller skips the batch).
inline bool adam_step(const std::vector<Tensor*>& params, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  check_shape(params.size() == state.m.size(), "adam_step: state size mismatch");
  for (const Tensor* p : params)
    for (float g : p->grad_view())
      if (!std::isfinite(g)) return false;

  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    const auto& grad = p.grad_view();
    const int64_t n = p.numel();
    check_shape(static_cast<int64_t>(m.size()) == n, "adam_step: moment size mismatch");
    for (int64_t i = 0; i < n; ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[static_cast<size_t>(i)]);
      const double mi = beta1 * m[static_cast<size_t>(i)] + (1.0 - beta1) * g;
      const double vi = beta2 * v[static_cast<size_t>(i)] + (1.0 - beta2) * g * g;
      m[static_cast<size_t>(i)] = static_cast<float>(mi);
      v[static_cast<size_t>(i)] = static_cast<float>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
      p.data()[i] = static_cast<float>(static_cast<double>(p.data()[i]) - update);
    }
  }
  return true;
}

}  // namespace s2b
