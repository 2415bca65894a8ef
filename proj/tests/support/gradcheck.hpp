#pragma once

// Central finite-difference gradient checks in 64-bit mode. The checker
// compares tape gradients against (f(x+h) - f(x-h)) / 2h element by element
// and reports the worst relative error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "s2bnet/autograd.hpp"
#include "s2bnet/ops.hpp"
#include "s2bnet/rng.hpp"
#include "s2bnet/s2bconv.hpp"
#include "s2bnet/tensor.hpp"

namespace gradcheck {

using DTensor = s2b::TensorT<double>;
using DTape = s2b::TapeT<double>;

// Scalar-valued function of the registered inputs; evaluated taped for the
// analytic pass and untaped for the finite-difference probes.
using LossFn = std::function<DTensor(DTape*)>;

inline double max_rel_error(std::vector<DTensor*> inputs, const LossFn& f,
                            double h = 1e-3) {
  for (DTensor* in : inputs) {
    in->set_requires_grad(true);
    in->grad();
    in->zero_grad();
  }
  DTape tape;
  DTensor loss = f(&tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (DTensor* in : inputs) analytic.push_back(in->grad_view());

  double worst = 0.0;
  for (size_t t = 0; t < inputs.size(); ++t) {
    DTensor& in = *inputs[t];
    for (int64_t i = 0; i < in.numel(); ++i) {
      const double saved = in.data()[i];
      in.data()[i] = saved + h;
      const double up = f(nullptr).item();
      in.data()[i] = saved - h;
      const double down = f(nullptr).item();
      in.data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[t][static_cast<size_t>(i)];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

struct OpCheck {
  std::string name;
  double worst = 0.0;
};

// One finite-difference sweep (20 random draws per op) over every
// differentiable tensor op plus the spectral-redistribution pipeline.
// Inputs are drawn away from relu/rprelu/|.| kinks by a 0.1 margin.
inline std::vector<OpCheck> run_op_suite(uint64_t seed, int points = 20) {
  namespace ops = s2b::ops;
  using s2b::rng::Engine;
  std::vector<OpCheck> results;
  Engine g = s2b::rng::make(seed);

  auto away_from_zero = [&](Engine& eng, s2b::Shape shape, double margin) {
    DTensor t = DTensor::zeros(shape);
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double mag = margin + s2b::rng::uniform(eng, 0.0, 1.0);
      t.data()[i] = s2b::rng::unit(eng) < 0.5 ? -mag : mag;
    }
    return t;
  };
  auto track = [&](const std::string& name, double err) {
    for (auto& r : results)
      if (r.name == name) {
        r.worst = std::max(r.worst, err);
        return;
      }
    results.push_back({name, err});
  };

  for (int p = 0; p < points; ++p) {
    {
      DTensor x = DTensor::randn(g, {1, 2, 5, 5});
      DTensor w = DTensor::randn(g, {2, 2, 3, 3});
      track("conv2d_fp", max_rel_error({&x, &w}, [&](DTape* t) {
        return ops::sum(t, ops::conv2d_fp(t, x, w, 1, 1));
      }));
    }
    {
      DTensor x = DTensor::randn(g, {2, 3, 4, 4});
      DTensor gamma = DTensor::randn(g, {3}, 0.3, 1.0);
      DTensor beta = DTensor::randn(g, {3}, 0.3);
      // Probe-weighted sum keeps the loss sensitive to every element.
      DTensor probe = DTensor::randn(g, {2, 3, 4, 4});
      track("layer_norm", max_rel_error({&x, &gamma, &beta}, [&](DTape* t) {
        return ops::sum(t, ops::mul(t, ops::layer_norm(t, x, gamma, beta), probe));
      }));
    }
    {
      DTensor x = away_from_zero(g, {2, 12}, 0.1);
      track("relu", max_rel_error({&x}, [&](DTape* t) {
        return ops::sum(t, ops::relu(t, x));
      }));
    }
    {
      DTensor x = DTensor::randn(g, {3, 7});
      track("sigmoid", max_rel_error({&x}, [&](DTape* t) {
        return ops::sum(t, ops::sigmoid(t, x));
      }));
      DTensor x2 = DTensor::randn(g, {3, 7});
      track("tanh", max_rel_error({&x2}, [&](DTape* t) {
        return ops::sum(t, ops::tanh_op(t, x2));
      }));
    }
    {
      DTensor a = DTensor::randn(g, {2, 3, 2, 2});
      DTensor b = DTensor::randn(g, {2, 3, 2, 2});
      track("add", max_rel_error({&a, &b}, [&](DTape* t) {
        return ops::sum(t, ops::add(t, a, b));
      }));
      track("mul", max_rel_error({&a, &b}, [&](DTape* t) {
        return ops::sum(t, ops::mul(t, a, b));
      }));
      DTensor c = DTensor::randn(g, {2, 2, 2, 2});
      track("concat_channels", max_rel_error({&a, &c}, [&](DTape* t) {
        return ops::sum(t, ops::concat_channels(t, a, c));
      }));
      track("slice_channels", max_rel_error({&a}, [&](DTape* t) {
        return ops::sum(t, ops::slice_channels(t, a, 1, 3));
      }));
    }
    {
      DTensor x = DTensor::randn(g, {2, 3, 4, 4});
      track("global_avg_pool", max_rel_error({&x}, [&](DTape* t) {
        return ops::sum(t, ops::global_avg_pool(t, x));
      }));
      DTensor x2 = DTensor::randn(g, {1, 2, 3, 3});
      track("bilinear_upsample2x", max_rel_error({&x2}, [&](DTape* t) {
        return ops::sum(t, ops::bilinear_upsample2x(t, x2));
      }));
    }
    {
      DTensor x = DTensor::randn(g, {3, 4});
      DTensor w = DTensor::randn(g, {5, 4});
      DTensor b = DTensor::randn(g, {5});
      track("linear", max_rel_error({&x, &w, &b}, [&](DTape* t) {
        return ops::sum(t, ops::linear(t, x, w, b));
      }));
    }
    {
      DTensor x = DTensor::randn(g, {2, 3, 3, 3});
      DTensor k = DTensor::randn(g, {2, 3});
      DTensor b = DTensor::randn(g, {2, 3});
      track("channel_affine", max_rel_error({&x, &k, &b}, [&](DTape* t) {
        return ops::sum(t, ops::channel_affine(t, x, k, b));
      }));
      DTensor kc = DTensor::randn(g, {3});
      DTensor bc = DTensor::randn(g, {3});
      track("channel_affine_const", max_rel_error({&x, &kc, &bc}, [&](DTape* t) {
        return ops::sum(t, ops::channel_affine_const(t, x, kc, bc));
      }));
      track("add_channel_bias", max_rel_error({&x, &bc}, [&](DTape* t) {
        return ops::sum(t, ops::add_channel_bias(t, x, bc));
      }));
    }
    {
      // Keep |pred - target| away from the kink.
      DTensor pred = DTensor::randn(g, {2, 8});
      DTensor target = pred.clone();
      for (int64_t i = 0; i < target.numel(); ++i)
        target.data()[i] += (s2b::rng::unit(g) < 0.5 ? -1.0 : 1.0) *
                            (0.1 + s2b::rng::unit(g));
      track("l1_loss", max_rel_error({&pred}, [&](DTape* t) {
        return ops::l1_loss(t, pred, target);
      }));
    }
    {
      // RPReLU probed away from the per-channel threshold.
      s2b::RpReluParamsT<double> act;
      act.gamma = DTensor::randn(g, {3}, 0.4);
      act.zeta = DTensor::randn(g, {3}, 0.4);
      act.beta = DTensor::randn(g, {3}, 0.3, 0.25);
      DTensor y = DTensor::zeros({2, 3, 3, 3});
      for (int64_t i = 0; i < y.numel(); ++i) {
        const int64_t ch = (i / 9) % 3;
        const double offset = (0.1 + s2b::rng::unit(g)) *
                              (s2b::rng::unit(g) < 0.5 ? -1.0 : 1.0);
        y.data()[i] = act.zeta.data()[ch] + offset;
      }
      track("rprelu", max_rel_error({&y, &act.gamma, &act.beta}, [&](DTape* t) {
        return ops::sum(t, s2b::rprelu(t, y, act));
      }));
    }
    {
      // Full SRM pipeline, x drawn away from the fc1 relu kink implicitly
      // (the kink sits in pooled space; random draws avoid measure-zero ties).
      s2b::rng::Engine gs = s2b::rng::make_stream(seed, 977 + static_cast<uint64_t>(p));
      s2b::SrmParamsT<double> srm = s2b::make_srm<double>(gs, 8, 4);
      DTensor x = DTensor::randn(g, {2, 8, 3, 3});
      track("srm_pipeline",
            max_rel_error({&x, &srm.w1, &srm.b1, &srm.w2, &srm.b2}, [&](DTape* t) {
              return ops::sum(t, s2b::srm_redistribute(t, x, srm));
            }));
    }
  }
  return results;
}

}  // namespace gradcheck
