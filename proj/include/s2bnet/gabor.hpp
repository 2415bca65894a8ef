#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/rng.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b {

/// Preset grid for Gabor weight initialization: 4 wavelengths spanning
/// sub-kernel to super-kernel scale and 16 orientations over [0, pi).
struct GaborSpec {
  std::vector<double> freqs{2.0, 3.0, 4.0, 6.0};  // wavelength lambda, pixels
  std::vector<double> thetas;                     // orientation, radians
  double psi = 0.0;                               // phase offset
  double gamma_aspect = 0.5;                      // envelope aspect ratio
  double sigma_divisor = 2.0 * 1.4142135623730951;  // sigma = K / divisor

  GaborSpec() {
    thetas.reserve(16);
    for (int i = 0; i < 16; ++i)
      thetas.push_back(3.14159265358979323846 * i / 16.0);
  }
};

inline void validate(const GaborSpec& spec) {
  check_value(!spec.freqs.empty(), "gabor: frequency list is empty");
  check_value(!spec.thetas.empty(), "gabor: orientation list is empty");
  for (double l : spec.freqs) check_value(l > 0.0, "gabor: wavelength must be > 0");
  for (double t : spec.thetas)
    check_value(t >= 0.0 && t < 3.14159265358979323846 + 1e-12,
                "gabor: orientation must lie in [0, pi)");
  check_value(spec.sigma_divisor > 0.0, "gabor: sigma divisor must be > 0");
}

/// Raw real-part Gabor response on the K x K grid with x, y in [0, K-1]:
///   exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambda + psi)
/// where (x', y') is the theta-rotated coordinate pair.
template <class T>
TensorT<T> gabor_raw(double lambda, double theta, const GaborSpec& spec, int64_t k) {
  check_value(lambda > 0.0, "gabor: wavelength must be > 0");
  check_value(k >= 1 && k % 2 == 1, "gabor: kernel size must be odd");
  const double sigma = static_cast<double>(k) / spec.sigma_divisor;
  const double g2 = spec.gamma_aspect * spec.gamma_aspect;
  const double ct = std::cos(theta), st = std::sin(theta);
  TensorT<T> kernel = TensorT<T>::zeros({k, k});
  for (int64_t x = 0; x < k; ++x)
    for (int64_t y = 0; y < k; ++y) {
      const double xr = x * ct + y * st;
      const double yr = -x * st + y * ct;
      const double env = std::exp(-(xr * xr + g2 * yr * yr) / (2.0 * sigma * sigma));
      const double wave = std::cos(2.0 * 3.14159265358979323846 * xr / lambda + spec.psi);
      kernel.data()[x * k + y] = static_cast<T>(env * wave);
    }
  return kernel;
}

/// Mean-centered Gabor kernel, optionally rescaled to a target standard
/// deviation (used to match the fan-in initialization variance).
template <class T>
TensorT<T> gabor_kernel(double lambda, double theta, const GaborSpec& spec, int64_t k,
                        double target_std = 0.0) {
  TensorT<T> kernel = gabor_raw<T>(lambda, theta, spec, k);
  const int64_t n = kernel.numel();
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += static_cast<double>(kernel.data()[i]);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(kernel.data()[i]) - mean;
    kernel.data()[i] = static_cast<T>(d);
    var += d * d;
  }
  if (target_std > 0.0) {
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    const double scale = sd > 1e-12 ? target_std / sd : 1.0;
    for (int64_t i = 0; i < n; ++i)
      kernel.data()[i] = static_cast<T>(static_cast<double>(kernel.data()[i]) * scale);
  }
  return kernel;
}

/// Latent weight bank [Cout,Cin,K,K]: each output channel draws one
/// (lambda, theta) pair from the preset grid, the kernel is mean-centered,
/// scaled so the bank matches the sqrt(2 / n_in) fan-in std, and replicated
/// across the input-channel axis. Deterministic for a fixed seed.
template <class T>
TensorT<T> gabor_init_bank(int64_t cout, int64_t cin, int64_t k, const GaborSpec& spec,
                           uint64_t seed) {
  validate(spec);
  check_value(cout >= 1 && cin >= 1, "gabor: channel counts must be >= 1");
  const double n_in = static_cast<double>(cin * k * k);
  const double target_std = std::sqrt(2.0 / n_in);
  rng::Engine g = rng::make(seed);
  TensorT<T> bank = TensorT<T>::zeros({cout, cin, k, k});
  const int64_t kk = k * k;
  for (int64_t oc = 0; oc < cout; ++oc) {
    const double lambda = spec.freqs[static_cast<size_t>(
        rng::index(g, static_cast<int64_t>(spec.freqs.size())))];
    const double theta = spec.thetas[static_cast<size_t>(
        rng::index(g, static_cast<int64_t>(spec.thetas.size())))];
    TensorT<T> kernel = gabor_kernel<T>(lambda, theta, spec, k, target_std);
    for (int64_t ic = 0; ic < cin; ++ic)
      std::copy_n(kernel.data(), kk, bank.data() + (oc * cin + ic) * kk);
  }
  return bank;
}

}  // namespace s2b
