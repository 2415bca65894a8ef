#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/data.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b::metrics {

inline constexpr double kPsnrCapDb = 100.0;  // identical images clamp here

struct MetricReport {
  std::map<std::string, double> values;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_pair(const Tensor& a, const Tensor& b, const char* who) {
  check_shape(a.same_shape(b), std::string(who) + ": shape mismatch " +
                                   shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline Tensor extract_band(const Tensor& t, int64_t band) {
  check_shape(t.rank() == 3, "extract_band: [B,H,W] tensor required");
  const int64_t h = t.dim(1), w = t.dim(2);
  Tensor out = Tensor::zeros({h, w});
  std::copy_n(t.data() + band * h * w, h * w, out.data());
  return out;
}

struct BlockStats {
  double mu1 = 0, mu2 = 0, var1 = 0, var2 = 0, cov = 0;
};

inline BlockStats block_stats(const float* a, const float* b, int64_t w, int64_t by,
                              int64_t bx, int64_t bh, int64_t bw) {
  BlockStats s;
  const double n = static_cast<double>(bh * bw);
  for (int64_t y = 0; y < bh; ++y)
    for (int64_t x = 0; x < bw; ++x) {
      s.mu1 += a[(by + y) * w + bx + x];
      s.mu2 += b[(by + y) * w + bx + x];
    }
  s.mu1 /= n;
  s.mu2 /= n;
  for (int64_t y = 0; y < bh; ++y)
    for (int64_t x = 0; x < bw; ++x) {
      const double d1 = a[(by + y) * w + bx + x] - s.mu1;
      const double d2 = b[(by + y) * w + bx + x] - s.mu2;
      s.var1 += d1 * d1;
      s.var2 += d2 * d2;
      s.cov += d1 * d2;
    }
  const double denom = n > 1 ? n - 1 : 1;
  s.var1 /= denom;
  s.var2 /= denom;
  s.cov /= denom;
  return s;
}

struct Quat {
  double w = 0, x = 0, y = 0, z = 0;

  Quat conj() const { return {w, -x, -y, -z}; }
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat operator-(const Quat& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }
};

// Q block size 32 with stride 32; boundary blocks smaller than 8 discarded.
constexpr int64_t kQBlock = 32;
constexpr int64_t kQMinBlock = 8;

template <class BlockFn>
double mean_over_blocks(int64_t h, int64_t w, const char* who, BlockFn&& fn) {
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t by = 0; by < h; by += kQBlock)
    for (int64_t bx = 0; bx < w; bx += kQBlock) {
      const int64_t bh = std::min(kQBlock, h - by);
      const int64_t bw = std::min(kQBlock, w - bx);
      if (bh < kQMinBlock || bw < kQMinBlock) continue;
      acc += fn(by, bx, bh, bw);
      ++count;
    }
  check_shape(count > 0, std::string(who) + ": image smaller than the minimum " +
                             std::to_string(kQMinBlock) + "x" +
                             std::to_string(kQMinBlock) + " block");
  return acc / static_cast<double>(count);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reference metrics
// ---------------------------------------------------------------------------

inline double psnr(const Tensor& g, const Tensor& h, double peak = 1.0) {
  detail::check_pair(g, h, "psnr");
  const int64_t n = g.numel();
  check_shape(n > 0, "psnr: empty tensors");
  double mse = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(g.data()[i]) - h.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

/// Mean spectral angle in degrees; pixels with a zero-norm spectrum in
/// either image are skipped.
inline double sam_degrees(const Tensor& g, const Tensor& h) {
  detail::check_pair(g, h, "sam");
  check_shape(g.rank() == 3 && g.dim(0) >= 2, "sam: at least 2 bands required");
  const int64_t b = g.dim(0), hw = g.dim(1) * g.dim(2);
  double acc = 0.0;
  int64_t count = 0;
  for (int64_t p = 0; p < hw; ++p) {
    double dot = 0.0, ng = 0.0, nh = 0.0;
    for (int64_t i = 0; i < b; ++i) {
      const double gv = g.data()[i * hw + p], hv = h.data()[i * hw + p];
      dot += gv * hv;
      ng += gv * gv;
      nh += hv * hv;
    }
    if (ng <= 0.0 || nh <= 0.0) continue;
    const double c = std::clamp(dot / std::sqrt(ng * nh), -1.0, 1.0);
    acc += std::acos(c);
    ++count;
  }
  if (count == 0) return 0.0;
  return acc / static_cast<double>(count) * (180.0 / 3.14159265358979323846);
}

inline double ergas(const Tensor& g, const Tensor& h, int64_t ratio = 4,
                    std::vector<std::string>* warnings = nullptr) {
  detail::check_pair(g, h, "ergas");
  check_shape(g.rank() == 3, "ergas: [B,H,W] tensor required");
  check_value(ratio > 0, "ergas: ratio must be > 0");
  const int64_t b = g.dim(0), hw = g.dim(1) * g.dim(2);
  double acc = 0.0;
  int64_t used = 0;
  for (int64_t i = 0; i < b; ++i) {
    double mu = 0.0, mse = 0.0;
    for (int64_t p = 0; p < hw; ++p) {
      const double gv = g.data()[i * hw + p];
      const double d = gv - h.data()[i * hw + p];
      mu += gv;
      mse += d * d;
    }
    mu /= static_cast<double>(hw);
    mse /= static_cast<double>(hw);
    if (mu == 0.0) {
      if (warnings)
        warnings->push_back("ergas: band " + std::to_string(i) +
                            " has zero mean, excluded");
      continue;
    }
    acc += mse / (mu * mu);
    ++used;
  }
  if (used == 0) {
    if (warnings) warnings->push_back("ergas: no usable bands");
    return 0.0;
  }
  return 100.0 / static_cast<double>(ratio) * std::sqrt(acc / static_cast<double>(used));
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), valid
/// positions only, averaged over bands. C1 = (0.01 peak)^2, C2 = (0.03 peak)^2.
inline double ssim(const Tensor& g, const Tensor& h, double peak = 1.0) {
  detail::check_pair(g, h, "ssim");
  check_shape(g.rank() == 3, "ssim: [B,H,W] tensor required");
  constexpr int64_t win = 11;
  const int64_t bands = g.dim(0), ih = g.dim(1), iw = g.dim(2);
  check_shape(ih >= win && iw >= win,
              "ssim: image smaller than the 11x11 window");
  // 2D Gaussian window, normalized.
  double wsum = 0.0;
  double window[win][win];
  for (int64_t y = 0; y < win; ++y)
    for (int64_t x = 0; x < win; ++x) {
      const double dy = static_cast<double>(y - win / 2);
      const double dx = static_cast<double>(x - win / 2);
      window[y][x] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
      wsum += window[y][x];
    }
  for (int64_t y = 0; y < win; ++y)
    for (int64_t x = 0; x < win; ++x) window[y][x] /= wsum;

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  for (int64_t band = 0; band < bands; ++band) {
    const float* a = g.data() + band * ih * iw;
    const float* b = h.data() + band * ih * iw;
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t oy = 0; oy + win <= ih; ++oy)
      for (int64_t ox = 0; ox + win <= iw; ++ox) {
        double mu1 = 0, mu2 = 0, s11 = 0, s22 = 0, s12 = 0;
        for (int64_t y = 0; y < win; ++y)
          for (int64_t x = 0; x < win; ++x) {
            const double wv = window[y][x];
            const double av = a[(oy + y) * iw + ox + x];
            const double bv = b[(oy + y) * iw + ox + x];
            mu1 += wv * av;
            mu2 += wv * bv;
            s11 += wv * av * av;
            s22 += wv * bv * bv;
            s12 += wv * av * bv;
          }
        const double var1 = s11 - mu1 * mu1;
        const double var2 = s22 - mu2 * mu2;
        const double cov = s12 - mu1 * mu2;
        acc += ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) /
               ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
        ++count;
      }
    total += acc / static_cast<double>(count);
  }
  return total / static_cast<double>(bands);
}

/// Universal image quality index over 32x32 sliding blocks.
inline double q_index(const Tensor& a, const Tensor& b) {
  detail::check_pair(a, b, "q_index");
  check_shape(a.rank() == 2, "q_index: [H,W] single band required");
  const int64_t h = a.dim(0), w = a.dim(1);
  return detail::mean_over_blocks(h, w, "q_index", [&](int64_t by, int64_t bx,
                                                       int64_t bh, int64_t bw) {
    const auto s = detail::block_stats(a.data(), b.data(), w, by, bx, bh, bw);
    const double den_var = s.var1 + s.var2;
    const double den_mu = s.mu1 * s.mu1 + s.mu2 * s.mu2;
    if (den_var != 0.0 && den_mu != 0.0)
      return 4.0 * s.cov * s.mu1 * s.mu2 / (den_var * den_mu);
    if (den_var != 0.0) return 2.0 * s.cov / den_var;          // zero means
    if (den_mu != 0.0) return 2.0 * s.mu1 * s.mu2 / den_mu;    // constant blocks
    return 1.0;
  });
}

/// Quaternion quality index over the 4 bands, mean over 32x32 blocks.
inline double q4(const Tensor& g, const Tensor& h) {
  detail::check_pair(g, h, "q4");
  check_shape(g.rank() == 3 && g.dim(0) == 4, "q4: exactly 4 bands required");
  const int64_t ih = g.dim(1), iw = g.dim(2), hw = ih * iw;
  auto quat_at = [&](const Tensor& t, int64_t p) {
    return detail::Quat{t.data()[p], t.data()[hw + p], t.data()[2 * hw + p],
                        t.data()[3 * hw + p]};
  };
  return detail::mean_over_blocks(ih, iw, "q4", [&](int64_t by, int64_t bx, int64_t bh,
                                                    int64_t bw) {
    const double n = static_cast<double>(bh * bw);
    detail::Quat mu1, mu2;
    for (int64_t y = 0; y < bh; ++y)
      for (int64_t x = 0; x < bw; ++x) {
        const int64_t p = (by + y) * iw + bx + x;
        const auto z1 = quat_at(g, p), z2 = quat_at(h, p);
        mu1.w += z1.w; mu1.x += z1.x; mu1.y += z1.y; mu1.z += z1.z;
        mu2.w += z2.w; mu2.x += z2.x; mu2.y += z2.y; mu2.z += z2.z;
      }
    mu1 = {mu1.w / n, mu1.x / n, mu1.y / n, mu1.z / n};
    mu2 = {mu2.w / n, mu2.x / n, mu2.y / n, mu2.z / n};
    double var1 = 0, var2 = 0;
    detail::Quat cov;
    for (int64_t y = 0; y < bh; ++y)
      for (int64_t x = 0; x < bw; ++x) {
        const int64_t p = (by + y) * iw + bx + x;
        const auto d1 = quat_at(g, p) - mu1;
        const auto d2 = quat_at(h, p) - mu2;
        var1 += d1.norm() * d1.norm();
        var2 += d2.norm() * d2.norm();
        const auto c = d1 * d2.conj();
        cov.w += c.w; cov.x += c.x; cov.y += c.y; cov.z += c.z;
      }
    const double denom = n > 1 ? n - 1 : 1;
    var1 /= denom;
    var2 /= denom;
    cov = {cov.w / denom, cov.x / denom, cov.y / denom, cov.z / denom};
    const double den_var = var1 + var2;
    const double den_mu = mu1.norm() * mu1.norm() + mu2.norm() * mu2.norm();
    if (den_var != 0.0 && den_mu != 0.0)
      return 4.0 * cov.norm() * mu1.norm() * mu2.norm() / (den_var * den_mu);
    if (den_var != 0.0) return 2.0 * cov.norm() / den_var;
    if (den_mu != 0.0) return 2.0 * mu1.norm() * mu2.norm() / den_mu;
    return 1.0;
  });
}

// ---------------------------------------------------------------------------
// No-reference metrics
// ---------------------------------------------------------------------------

/// Spectral distortion: inter-band Q differences between the fused image and
/// the low-resolution input (p = 1).
inline double d_lambda(const Tensor& fused, const Tensor& lrms) {
  check_shape(fused.rank() == 3 && lrms.rank() == 3, "d_lambda: [B,H,W] required");
  const int64_t b = fused.dim(0);
  check_shape(b >= 2, "d_lambda: at least 2 bands required");
  check_shape(lrms.dim(0) == b, "d_lambda: band count mismatch");
  double acc = 0.0;
  int64_t pairs = 0;
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = i + 1; j < b; ++j) {
      const double qf = q_index(detail::extract_band(fused, i),
                                detail::extract_band(fused, j));
      const double ql = q_index(detail::extract_band(lrms, i),
                                detail::extract_band(lrms, j));
      acc += std::abs(qf - ql);
      ++pairs;
    }
  return acc / static_cast<double>(pairs);
}

/// Spatial distortion against the PAN channel (q = 1); the low-resolution
/// side compares with the Wald-degraded PAN.
inline double d_s(const Tensor& fused, const Tensor& lrms, const Tensor& pan,
                  int64_t ratio) {
  check_shape(fused.rank() == 3 && lrms.rank() == 3, "d_s: [B,H,W] required");
  check_shape(pan.rank() == 3 && pan.dim(0) == 1, "d_s: pan must be [1,H,W]");
  const int64_t b = fused.dim(0);
  check_shape(lrms.dim(0) == b, "d_s: band count mismatch");
  const Tensor pan_band = detail::extract_band(pan, 0);
  const Tensor pan_lr3 = data::blur_decimate(pan, ratio);
  const Tensor pan_lr = detail::extract_band(pan_lr3, 0);
  double acc = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double qf = q_index(detail::extract_band(fused, i), pan_band);
    const double ql = q_index(detail::extract_band(lrms, i), pan_lr);
    acc += std::abs(qf - ql);
  }
  return acc / static_cast<double>(b);
}

inline double qnr(double dl, double ds) { return (1.0 - dl) * (1.0 - ds); }

// ---------------------------------------------------------------------------
// Per-pair report
// ---------------------------------------------------------------------------

/// Reduced-resolution metrics when ground truth is present, the QNR family
/// always.
inline MetricReport evaluate_pair(const Tensor& fused, const data::ScenePair& pair,
                                  double peak = 1.0) {
  MetricReport report;
  if (pair.has_gt()) {
    report.values["psnr"] = psnr(pair.gt, fused, peak);
    report.values["ssim"] = ssim(pair.gt, fused, peak);
    report.values["sam"] = sam_degrees(pair.gt, fused);
    report.values["ergas"] = ergas(pair.gt, fused, pair.meta.scale_ratio,
                                   &report.warnings);
    report.values["q4"] = q4(pair.gt, fused);
  }
  const double dl = d_lambda(fused, pair.lrms);
  const double ds = d_s(fused, pair.lrms, pair.pan, pair.meta.scale_ratio);
  report.values["d_lambda"] = dl;
  report.values["d_s"] = ds;
  report.values["qnr"] = qnr(dl, ds);
  return report;
}

}  // namespace s2b::metrics
