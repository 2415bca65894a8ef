#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "s2bnet/common.hpp"
#include "s2bnet/io.hpp"
#include "s2bnet/rng.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b::data {

struct SceneMeta {
  std::string sensor = "synthetic";
  int64_t scale_ratio = 4;
};

/// One training/evaluation sample: full-resolution PAN, reduced-resolution
/// multispectral input, and (when produced by the reduced-resolution
/// protocol) the original multispectral image as ground truth.
struct ScenePair {
  Tensor pan;   // [1,H,W], values in [0,1]
  Tensor lrms;  // [4,H/ratio,W/ratio], values in [0,1]
  Tensor gt;    // [4,H,W] or empty when unavailable
  SceneMeta meta;

  bool has_gt() const { return gt.numel() > 0; }
};

using Dataset = std::vector<ScenePair>;

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

namespace detail {

inline int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

inline std::vector<double> gaussian_taps(double sigma, int64_t radius) {
  std::vector<double> taps(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[static_cast<size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

// Keys cubic kernel, a = -0.5 (Catmull-Rom).
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

}  // namespace detail

/// Separable Gaussian blur (5x5, sigma 1.0 by default), reflected borders.
/// Preserves constant images exactly.
inline Tensor gaussian_blur(const Tensor& x, double sigma = 1.0, int64_t radius = 2) {
  check_shape(x.rank() == 3, "gaussian_blur: [C,H,W] tensor required");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto taps = detail::gaussian_taps(sigma, radius);
  Tensor tmp = Tensor::zeros(x.shape());
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t b = 0; b < c; ++b) {
    const float* src = x.data() + b * h * w;
    float* mid = tmp.data() + b * h * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int64_t t = -radius; t <= radius; ++t)
          acc += taps[static_cast<size_t>(t + radius)] *
                 src[y * w + detail::reflect(xx + t, w)];
        mid[y * w + xx] = static_cast<float>(acc);
      }
    float* dst = out.data() + b * h * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int64_t t = -radius; t <= radius; ++t)
          acc += taps[static_cast<size_t>(t + radius)] *
                 mid[detail::reflect(y + t, h) * w + xx];
        dst[y * w + xx] = static_cast<float>(acc);
      }
  }
  return out;
}

/// Gaussian blur followed by pick-every-ratio decimation (phase ratio/2).
inline Tensor blur_decimate(const Tensor& x, int64_t ratio) {
  check_shape(x.rank() == 3, "blur_decimate: [C,H,W] tensor required");
  check_value(ratio >= 1, "blur_decimate: ratio must be >= 1");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  check_shape(h % ratio == 0 && w % ratio == 0,
              "blur_decimate: extents " + std::to_string(h) + "x" + std::to_string(w) +
                  " not divisible by ratio " + std::to_string(ratio));
  if (ratio == 1) return x.clone();
  Tensor blurred = gaussian_blur(x);
  const int64_t oh = h / ratio, ow = w / ratio, phase = ratio / 2;
  Tensor out = Tensor::zeros({c, oh, ow});
  for (int64_t b = 0; b < c; ++b)
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t xx = 0; xx < ow; ++xx)
        out.data()[(b * oh + y) * ow + xx] =
            blurred.data()[(b * h + y * ratio + phase) * w + xx * ratio + phase];
  return out;
}

/// Reduced-resolution protocol: degrade the original multispectral image to
/// make the network input, keep the original as ground truth.
inline ScenePair wald_degrade(const Tensor& hrms, const Tensor& pan_hr, int64_t ratio) {
  check_shape(hrms.rank() == 3 && hrms.dim(0) == 4, "wald_degrade: hrms must be [4,H,W]");
  check_shape(pan_hr.rank() == 3 && pan_hr.dim(0) == 1,
              "wald_degrade: pan must be [1,H,W]");
  check_shape(hrms.dim(1) == pan_hr.dim(1) && hrms.dim(2) == pan_hr.dim(2),
              "wald_degrade: pan/hrms extent mismatch");
  ScenePair pair;
  pair.pan = pan_hr.clone();
  pair.lrms = blur_decimate(hrms, ratio);
  pair.gt = hrms.clone();
  pair.meta.scale_ratio = ratio;
  return pair;
}

/// Keys bicubic upsampling by an integer factor, half-pixel centers,
/// reflected borders. The classical non-learned comparison baseline.
inline Tensor bicubic_upsample(const Tensor& x, int64_t ratio) {
  check_shape(x.rank() == 3, "bicubic_upsample: [C,H,W] tensor required");
  check_value(ratio >= 1, "bicubic_upsample: ratio must be >= 1");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int64_t oh = h * ratio, ow = w * ratio;
  struct Taps {
    int64_t idx[4];
    double wgt[4];
  };
  auto make_taps = [&](int64_t out_extent, int64_t in_extent) {
    std::vector<Taps> taps(static_cast<size_t>(out_extent));
    for (int64_t o = 0; o < out_extent; ++o) {
      const double s = (static_cast<double>(o) + 0.5) / static_cast<double>(ratio) - 0.5;
      const int64_t base = static_cast<int64_t>(std::floor(s));
      const double f = s - static_cast<double>(base);
      for (int m = 0; m < 4; ++m) {
        taps[static_cast<size_t>(o)].idx[m] =
            detail::reflect(base - 1 + m, in_extent);
        taps[static_cast<size_t>(o)].wgt[m] =
            detail::cubic_weight(static_cast<double>(m - 1) - f);
      }
    }
    return taps;
  };
  const auto rows = make_taps(oh, h);
  const auto cols = make_taps(ow, w);
  Tensor out = Tensor::zeros({c, oh, ow});
  for (int64_t b = 0; b < c; ++b) {
    const float* src = x.data() + b * h * w;
    float* dst = out.data() + b * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      const auto& rt = rows[static_cast<size_t>(y)];
      for (int64_t xx = 0; xx < ow; ++xx) {
        const auto& ct = cols[static_cast<size_t>(xx)];
        double acc = 0.0;
        for (int r = 0; r < 4; ++r)
          for (int cc = 0; cc < 4; ++cc)
            acc += rt.wgt[r] * ct.wgt[cc] * src[rt.idx[r] * w + ct.idx[cc]];
        dst[y * ow + xx] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Procedural scenes
// ---------------------------------------------------------------------------

/// Smooth low-frequency fields plus a few soft edges for the multispectral
/// bands; the panchromatic channel is a fixed positive spectral mix of the
/// bands plus high-frequency detail the bands do not carry. Deterministic
/// per seed, all values in [0,1].
inline std::pair<Tensor, Tensor> synth_scene(uint64_t seed, int64_t h, int64_t w) {
  check_value(h >= 4 && w >= 4, "synth_scene: extents must be >= 4");
  rng::Engine g = rng::make(seed);
  const double ext = static_cast<double>(std::max(h, w));
  constexpr double tau = 6.283185307179586477;

  struct Wave {
    double fx, fy, phase, amp;
  };
  auto make_waves = [&](int count, double f_lo, double f_hi, double amp) {
    std::vector<Wave> waves;
    for (int i = 0; i < count; ++i) {
      const double f = rng::uniform(g, f_lo, f_hi);
      const double dir = rng::uniform(g, 0.0, tau);
      waves.push_back({f * std::cos(dir) / ext, f * std::sin(dir) / ext,
                       rng::uniform(g, 0.0, tau),
                       amp * rng::uniform(g, 0.5, 1.0)});
    }
    return waves;
  };
  auto eval_waves = [&](const std::vector<Wave>& waves, int64_t y, int64_t x) {
    double v = 0.0;
    for (const auto& wv : waves)
      v += wv.amp * std::sin(tau * (wv.fx * x + wv.fy * y) + wv.phase);
    return v;
  };

  const auto base = make_waves(5, 0.5, 2.0, 0.11);
  std::vector<std::vector<Wave>> band_waves;
  for (int b = 0; b < 4; ++b) band_waves.push_back(make_waves(3, 0.5, 2.5, 0.035));
  const auto detail_waves = make_waves(3, 5.0, 9.0, 0.5);

  // Sparse soft edges shared by every band.
  struct Edge {
    double nx, ny, offset, amp, softness;
  };
  std::vector<Edge> edges;
  const int n_edges = 2 + static_cast<int>(rng::index(g, 2));
  for (int i = 0; i < n_edges; ++i) {
    const double dir = rng::uniform(g, 0.0, tau);
    const double px = rng::uniform(g, 0.2, 0.8) * static_cast<double>(w);
    const double py = rng::uniform(g, 0.2, 0.8) * static_cast<double>(h);
    const double nx = std::cos(dir), ny = std::sin(dir);
    edges.push_back({nx, ny, nx * px + ny * py,
                     rng::uniform(g, -0.12, 0.12), rng::uniform(g, 0.6, 1.2)});
  }
  auto eval_edges = [&](int64_t y, int64_t x, double sharpen) {
    double v = 0.0;
    for (const auto& e : edges) {
      const double d = (e.nx * x + e.ny * y - e.offset) / (e.softness * sharpen);
      v += e.amp * std::tanh(d);
    }
    return v;
  };

  double band_gain[4], edge_gain[4], mix[4];
  double mix_total = 0.0;
  for (int b = 0; b < 4; ++b) {
    band_gain[b] = rng::uniform(g, 0.6, 1.0);
    edge_gain[b] = rng::uniform(g, 0.5, 1.0);
    mix[b] = rng::uniform(g, 0.5, 1.0);
    mix_total += mix[b];
  }
  for (int b = 0; b < 4; ++b) mix[b] /= mix_total;

  Tensor hrms = Tensor::zeros({4, h, w});
  Tensor pan = Tensor::zeros({1, h, w});
  auto clamp01 = [](double v) {
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
  };
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double b0 = eval_waves(base, y, x);
      const double e0 = eval_edges(y, x, 1.0);
      double mixed = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double v = 0.5 + band_gain[b] * b0 + eval_waves(band_waves[static_cast<size_t>(b)], y, x) +
                         edge_gain[b] * e0;
        hrms.data()[(b * h + y) * w + x] = clamp01(v);
        mixed += mix[b] * std::clamp(v, 0.0, 1.0);
      }
      const double detail = 0.05 * eval_waves(detail_waves, y, x) +
                            0.35 * (eval_edges(y, x, 0.35) - e0);
      pan.data()[y * w + x] = clamp01(mixed + detail);
    }
  return {hrms, pan};
}

// ---------------------------------------------------------------------------
// Dataset directory I/O
// ---------------------------------------------------------------------------

namespace detail {

inline std::string indexed_name(const char* stem, int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04lld.s2bt", stem, static_cast<long long>(i));
  return buf;
}

}  // namespace detail

/// Layout: manifest.json + pan_%04d.s2bt, lrms_%04d.s2bt, gt_%04d.s2bt.
inline void save_dataset(const Dataset& pairs, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory: " + dir);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["count"] = pairs.size();
  nlohmann::json entries = nlohmann::json::array();
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const auto idx = static_cast<int64_t>(i);
    io::save_tensor(dir + "/" + detail::indexed_name("pan", idx), p.pan);
    io::save_tensor(dir + "/" + detail::indexed_name("lrms", idx), p.lrms);
    nlohmann::json e;
    e["pan"] = detail::indexed_name("pan", idx);
    e["lrms"] = detail::indexed_name("lrms", idx);
    if (p.has_gt()) {
      io::save_tensor(dir + "/" + detail::indexed_name("gt", idx), p.gt);
      e["gt"] = detail::indexed_name("gt", idx);
    }
    e["sensor"] = p.meta.sensor;
    e["scale_ratio"] = p.meta.scale_ratio;
    entries.push_back(e);
  }
  manifest["entries"] = entries;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write dataset manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw IoError("cannot open dataset manifest: " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset manifest in " + dir + ": " + e.what());
  }
  if (!manifest.contains("count") || !manifest.contains("entries"))
    throw IoError("dataset manifest missing count/entries: " + dir);
  const auto& entries = manifest["entries"];
  if (manifest["count"].get<size_t>() != entries.size())
    throw IoError("dataset manifest count mismatch in " + dir + ": count says " +
                  std::to_string(manifest["count"].get<size_t>()) + ", found " +
                  std::to_string(entries.size()) + " entries");
  Dataset pairs;
  for (const auto& e : entries) {
    ScenePair p;
    p.pan = io::load_tensor(dir + "/" + e.at("pan").get<std::string>());
    p.lrms = io::load_tensor(dir + "/" + e.at("lrms").get<std::string>());
    if (e.contains("gt")) p.gt = io::load_tensor(dir + "/" + e.at("gt").get<std::string>());
    p.meta.sensor = e.value("sensor", "synthetic");
    p.meta.scale_ratio = e.value("scale_ratio", int64_t{4});
    check_shape(p.pan.rank() == 3 && p.lrms.rank() == 3,
                "dataset entry has wrong tensor rank");
    check_shape(p.pan.dim(1) == p.lrms.dim(1) * p.meta.scale_ratio &&
                    p.pan.dim(2) == p.lrms.dim(2) * p.meta.scale_ratio,
                "dataset entry violates the pan/lrms scale ratio");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace s2b::data
