#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2bnet/efficiency.hpp"
#include "s2bnet/ops.hpp"
#include "s2bnet/s2bconv.hpp"

namespace s2b {

inline constexpr int64_t kMsBands = 4;  // multispectral bands
inline constexpr int64_t kPanBands = 1;

struct S2BNetConfig {
  int64_t base_channels = 32;
  int64_t stages = 2;
  int64_t kernel = 3;
  int64_t srm_reduction = 4;
  int64_t scale_ratio = 4;
  bool use_gsfa = true;
  bool use_srm = true;
  GaborSpec gabor;
};

inline void validate(const S2BNetConfig& cfg) {
  check_value(cfg.stages >= 1, "config: stages must be >= 1");
  check_value(cfg.base_channels >= 1, "config: base_channels must be >= 1");
  check_shape(cfg.base_channels % cfg.srm_reduction == 0,
              "config: base_channels must be divisible by srm_reduction");
  check_value(cfg.kernel >= 1 && cfg.kernel % 2 == 1, "config: kernel must be odd");
  check_value(cfg.scale_ratio >= 1 &&
                  (cfg.scale_ratio & (cfg.scale_ratio - 1)) == 0,
              "config: scale_ratio must be a power of 2");
  validate(cfg.gabor);
}

template <class T>
struct BasicBlockT {
  TensorT<T> ln_gamma, ln_beta;
  PlainBinConvT<T> inc;  // 1x1, C -> 2C
  S2BConvT<T> conv;      // at 2C
  PlainBinConvT<T> dec;  // 1x1, 2C -> C
};

template <class T>
struct EncoderT {
  BasicBlockT<T> block;
  PlainBinConvT<T> down;  // 3x3 stride 2, C -> 2C
};

template <class T>
struct DecoderT {
  PlainBinConvT<T> up;    // 3x3 after bilinear x2, 2C -> C
  PlainBinConvT<T> fuse;  // 1x1 after skip concat, 2C -> C
  BasicBlockT<T> block;
};

template <class T>
struct S2BNetModelT {
  S2BNetConfig config;
  uint64_t seed = 0;
  TensorT<T> head_w, head_b;  // one of the two full-precision convs
  S2BConvT<T> head_unit;
  std::vector<EncoderT<T>> encoders;
  BasicBlockT<T> bottleneck;
  std::vector<DecoderT<T>> decoders;  // applied deepest-first
  S2BConvT<T> tail_unit;
  TensorT<T> tail_w, tail_b;  // the other full-precision conv
  std::vector<LayerInfo> plan;
};

using S2BNetModel = S2BNetModelT<float>;

struct ForwardOptions {
  bool zero_skips = false;  // diagnostic: sever the encoder->decoder skips
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace netdetail {

inline void plan_bin_conv(std::vector<LayerInfo>& plan, const std::string& name,
                          int64_t cin, int64_t cout, int64_t k, int64_t stride,
                          int64_t in_div) {
  LayerInfo conv;
  conv.name = name;
  conv.kind = LayerKind::Conv;
  conv.binarized = true;
  conv.cin = cin;
  conv.cout = cout;
  conv.k = k;
  conv.stride = stride;
  conv.in_div = in_div;
  conv.out_div = in_div * stride;
  conv.extra_params = 1;  // STE slope
  plan.push_back(conv);
  LayerInfo rescale;
  rescale.name = name + ".rescale";
  rescale.kind = LayerKind::Rescale;
  rescale.cin = rescale.cout = cout;
  rescale.in_div = rescale.out_div = conv.out_div;
  plan.push_back(rescale);
}

inline void plan_s2bconv(std::vector<LayerInfo>& plan, const std::string& name,
                         int64_t c, int64_t k, int64_t r, bool use_srm, int64_t div) {
  if (use_srm) {
    LayerInfo gap{name + ".srm.gap", LayerKind::GlobalAvgPool};
    gap.cin = gap.cout = c;
    gap.in_div = gap.out_div = div;
    plan.push_back(gap);
    LayerInfo fc1{name + ".srm.fc1", LayerKind::Linear};
    fc1.spatial = false;
    fc1.din = c;
    fc1.dout = c / r;
    fc1.cout = c / r;
    plan.push_back(fc1);
    LayerInfo act{name + ".srm.relu", LayerKind::Relu};
    act.spatial = false;
    act.cin = act.cout = c / r;
    plan.push_back(act);
    LayerInfo fc2{name + ".srm.fc2", LayerKind::Linear};
    fc2.spatial = false;
    fc2.din = c / r;
    fc2.dout = 2 * c;
    fc2.cout = 2 * c;
    plan.push_back(fc2);
    LayerInfo sig{name + ".srm.sigmoid", LayerKind::Sigmoid};
    sig.spatial = false;
    sig.cin = sig.cout = c;
    plan.push_back(sig);
    LayerInfo th{name + ".srm.tanh", LayerKind::Tanh};
    th.spatial = false;
    th.cin = th.cout = c;
    plan.push_back(th);
    LayerInfo aff{name + ".srm.affine", LayerKind::ChannelAffine};
    aff.cin = aff.cout = c;
    aff.in_div = aff.out_div = div;
    plan.push_back(aff);
  } else {
    LayerInfo aff{name + ".affine", LayerKind::ChannelAffine};
    aff.cin = aff.cout = c;
    aff.in_div = aff.out_div = div;
    aff.extra_params = 2 * c;
    plan.push_back(aff);
  }
  plan_bin_conv(plan, name + ".conv", c, c, k, 1, div);
  LayerInfo act{name + ".rprelu", LayerKind::RpRelu};
  act.cin = act.cout = c;
  act.in_div = act.out_div = div;
  act.extra_params = 3 * c;
  plan.push_back(act);
  LayerInfo res{name + ".residual", LayerKind::Add};
  res.cin = res.cout = c;
  res.in_div = res.out_div = div;
  plan.push_back(res);
}

inline void plan_basic_block(std::vector<LayerInfo>& plan, const std::string& name,
                             int64_t c, int64_t k, int64_t r, bool use_srm,
                             int64_t div) {
  LayerInfo ln{name + ".ln", LayerKind::LayerNorm};
  ln.cin = ln.cout = c;
  ln.in_div = ln.out_div = div;
  ln.extra_params = 2 * c;
  plan.push_back(ln);
  plan_bin_conv(plan, name + ".inc", c, 2 * c, 1, 1, div);
  plan_s2bconv(plan, name + ".conv", 2 * c, k, r, use_srm, div);
  plan_bin_conv(plan, name + ".dec", 2 * c, c, 1, 1, div);
  LayerInfo act{name + ".relu", LayerKind::Relu};
  act.cin = act.cout = c;
  act.in_div = act.out_div = div;
  plan.push_back(act);
}

template <class T>
BasicBlockT<T> make_basic_block(rng::Engine& g, const S2BNetConfig& cfg, int64_t c) {
  BasicBlockT<T> block;
  block.ln_gamma = TensorT<T>::full({c}, T(1)).set_requires_grad(true);
  block.ln_beta = TensorT<T>::zeros({c}).set_requires_grad(true);
  block.inc = make_plain_bin_conv<T>(g, 2 * c, c, 1, 1);
  block.conv = make_s2bconv<T>(g, 2 * c, cfg.kernel, cfg.srm_reduction, cfg.use_srm,
                               cfg.use_gsfa, cfg.gabor);
  block.dec = make_plain_bin_conv<T>(g, c, 2 * c, 1, 1);
  return block;
}

}  // namespace netdetail

/// Deterministic model construction. The same (config, seed) pair always
/// yields byte-identical parameters.
template <class T>
S2BNetModelT<T> build(const S2BNetConfig& cfg, uint64_t seed) {
  validate(cfg);
  S2BNetModelT<T> m;
  m.config = cfg;
  m.seed = seed;
  rng::Engine g = rng::make(seed);
  const int64_t c = cfg.base_channels, k = cfg.kernel;

  m.head_w = TensorT<T>::randn(
      g, {c, kMsBands + kPanBands, k, k},
      static_cast<T>(std::sqrt(2.0 / static_cast<double>((kMsBands + kPanBands) * k * k))));
  m.head_w.set_requires_grad(true);
  m.head_b = TensorT<T>::zeros({c}).set_requires_grad(true);
  m.head_unit = make_s2bconv<T>(g, c, k, cfg.srm_reduction, cfg.use_srm, cfg.use_gsfa,
                                cfg.gabor);

  for (int64_t i = 0; i < cfg.stages; ++i) {
    const int64_t w = c << i;
    EncoderT<T> enc;
    enc.block = netdetail::make_basic_block<T>(g, cfg, w);
    enc.down = make_plain_bin_conv<T>(g, 2 * w, w, k, 2);
    m.encoders.push_back(std::move(enc));
  }
  m.bottleneck = netdetail::make_basic_block<T>(g, cfg, c << cfg.stages);
  for (int64_t i = cfg.stages - 1; i >= 0; --i) {
    const int64_t w = c << i;
    DecoderT<T> dec;
    dec.up = make_plain_bin_conv<T>(g, w, 2 * w, k, 1);
    dec.fuse = make_plain_bin_conv<T>(g, w, 2 * w, 1, 1);
    dec.block = netdetail::make_basic_block<T>(g, cfg, w);
    m.decoders.push_back(std::move(dec));
  }
  m.tail_unit = make_s2bconv<T>(g, c, k, cfg.srm_reduction, cfg.use_srm, cfg.use_gsfa,
                                cfg.gabor);
  m.tail_w = TensorT<T>::randn(
      g, {kMsBands, c, k, k},
      static_cast<T>(std::sqrt(2.0 / static_cast<double>(c * k * k))));
  m.tail_w.set_requires_grad(true);
  m.tail_b = TensorT<T>::zeros({kMsBands}).set_requires_grad(true);

  // Layer plan for the cost ledger; mirrors forward() step for step.
  auto& plan = m.plan;
  int64_t ms_div = cfg.scale_ratio;
  while (ms_div > 1) {
    LayerInfo up{"input.upsample_x" + std::to_string(cfg.scale_ratio / ms_div * 2),
                 LayerKind::Bilinear2x};
    up.cin = up.cout = kMsBands;
    up.in_div = ms_div;
    up.out_div = ms_div / 2;
    plan.push_back(up);
    ms_div /= 2;
  }
  LayerInfo head{"head.conv", LayerKind::Conv};
  head.cin = kMsBands + kPanBands;
  head.cout = c;
  head.k = k;
  head.bias_params = c;
  plan.push_back(head);
  netdetail::plan_s2bconv(plan, "head_s2b", c, k, cfg.srm_reduction, cfg.use_srm, 1);
  for (int64_t i = 0; i < cfg.stages; ++i) {
    const int64_t w = c << i;
    const int64_t div = int64_t{1} << i;
    const std::string prefix = "enc" + std::to_string(i);
    netdetail::plan_basic_block(plan, prefix + ".block", w, k, cfg.srm_reduction,
                                cfg.use_srm, div);
    netdetail::plan_bin_conv(plan, prefix + ".down", w, 2 * w, k, 2, div);
  }
  netdetail::plan_basic_block(plan, "bottleneck", c << cfg.stages, k,
                              cfg.srm_reduction, cfg.use_srm, int64_t{1} << cfg.stages);
  for (int64_t i = cfg.stages - 1; i >= 0; --i) {
    const int64_t w = c << i;
    const int64_t div = int64_t{1} << i;
    const std::string prefix = "dec" + std::to_string(i);
    LayerInfo up{prefix + ".up.bilinear", LayerKind::Bilinear2x};
    up.cin = up.cout = 2 * w;
    up.in_div = 2 * div;
    up.out_div = div;
    plan.push_back(up);
    netdetail::plan_bin_conv(plan, prefix + ".up.conv", 2 * w, w, k, 1, div);
    netdetail::plan_bin_conv(plan, prefix + ".fuse", 2 * w, w, 1, 1, div);
    netdetail::plan_basic_block(plan, prefix + ".block", w, k, cfg.srm_reduction,
                                cfg.use_srm, div);
  }
  netdetail::plan_s2bconv(plan, "tail_s2b", c, k, cfg.srm_reduction, cfg.use_srm, 1);
  LayerInfo res{"tail.residual", LayerKind::Add};
  res.cin = res.cout = c;
  plan.push_back(res);
  LayerInfo tail{"tail.conv", LayerKind::Conv};
  tail.cin = c;
  tail.cout = kMsBands;
  tail.k = k;
  tail.bias_params = kMsBands;
  plan.push_back(tail);

  // Channel ladder sanity: widths double on the way down and mirror back up.
  for (int64_t i = 0; i < cfg.stages; ++i) {
    check_shape(m.encoders[static_cast<size_t>(i)].down.w_f.dim(0) == (c << (i + 1)),
                "build: encoder channel ladder broken");
    const auto& dec = m.decoders[static_cast<size_t>(cfg.stages - 1 - i)];
    check_shape(dec.up.w_f.dim(0) == (c << i), "build: decoder channel ladder broken");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

namespace netdetail {

template <class T>
TensorT<T> basic_block_forward(TapeT<T>* tape, const TensorT<T>& x,
                               const BasicBlockT<T>& block) {
  TensorT<T> h = ops::layer_norm(tape, x, block.ln_gamma, block.ln_beta);
  h = plain_bin_conv_forward(tape, h, block.inc);
  h = s2bconv_forward(tape, h, block.conv);
  h = plain_bin_conv_forward(tape, h, block.dec);
  return ops::relu(tape, h);
}

}  // namespace netdetail

template <class T>
TensorT<T> forward(TapeT<T>* tape, const S2BNetModelT<T>& m, const TensorT<T>& pan,
                   const TensorT<T>& lrms, const ForwardOptions& opt = {}) {
  const auto& cfg = m.config;
  check_shape(pan.rank() == 4 && pan.dim(1) == kPanBands,
              "forward: pan must be [N,1,H,W]");
  check_shape(lrms.rank() == 4 && lrms.dim(1) == kMsBands,
              "forward: lrms must be [N,4,H/ratio,W/ratio]");
  const int64_t n = pan.dim(0), h = pan.dim(2), w = pan.dim(3);
  check_shape(lrms.dim(0) == n, "forward: batch mismatch between pan and lrms");
  const int64_t down = int64_t{1} << cfg.stages;
  check_shape(h % down == 0 && w % down == 0,
              "forward: spatial extents must be divisible by 2^stages = " +
                  std::to_string(down));
  check_shape(h % cfg.scale_ratio == 0 && w % cfg.scale_ratio == 0,
              "forward: spatial extents must be divisible by scale_ratio");
  check_shape(lrms.dim(2) == h / cfg.scale_ratio && lrms.dim(3) == w / cfg.scale_ratio,
              "forward: lrms extents must equal pan extents / scale_ratio");

  TensorT<T> up = lrms;
  for (int64_t r = cfg.scale_ratio; r > 1; r /= 2)
    up = ops::bilinear_upsample2x(tape, up);
  TensorT<T> x = ops::concat_channels(tape, up, pan);
  TensorT<T> shallow = ops::add_channel_bias(
      tape, ops::conv2d_fp(tape, x, m.head_w, 1, cfg.kernel / 2), m.head_b);
  TensorT<T> feat = s2bconv_forward(tape, shallow, m.head_unit);

  std::vector<TensorT<T>> skips;
  for (const auto& enc : m.encoders) {
    TensorT<T> kept = netdetail::basic_block_forward(tape, feat, enc.block);
    skips.push_back(kept);
    feat = plain_bin_conv_forward(tape, kept, enc.down);
  }
  feat = netdetail::basic_block_forward(tape, feat, m.bottleneck);
  for (size_t i = 0; i < m.decoders.size(); ++i) {
    const auto& dec = m.decoders[i];
    feat = ops::bilinear_upsample2x(tape, feat);
    feat = plain_bin_conv_forward(tape, feat, dec.up);
    TensorT<T> skip = skips[m.decoders.size() - 1 - i];
    if (opt.zero_skips) skip = ops::scale(tape, skip, T(0));
    feat = ops::concat_channels(tape, feat, skip);
    feat = plain_bin_conv_forward(tape, feat, dec.fuse);
    feat = netdetail::basic_block_forward(tape, feat, dec.block);
  }
  TensorT<T> deep = s2bconv_forward(tape, feat, m.tail_unit);
  TensorT<T> fused = ops::add(tape, shallow, deep);
  return ops::add_channel_bias(
      tape, ops::conv2d_fp(tape, fused, m.tail_w, 1, cfg.kernel / 2), m.tail_b);
}

// ---------------------------------------------------------------------------
// Parameter traversal
// ---------------------------------------------------------------------------

namespace netdetail {

template <class T, class F>
void visit_s2bconv(S2BConvT<T>& u, const std::string& prefix, F& fn) {
  fn(prefix + ".w_f", u.w_f);
  fn(prefix + ".alpha", u.alpha);
  if (u.use_srm) {
    fn(prefix + ".srm.w1", u.srm.w1);
    fn(prefix + ".srm.b1", u.srm.b1);
    fn(prefix + ".srm.w2", u.srm.w2);
    fn(prefix + ".srm.b2", u.srm.b2);
  } else {
    fn(prefix + ".affine.k", u.chan_k);
    fn(prefix + ".affine.b", u.chan_b);
  }
  fn(prefix + ".act.gamma", u.act.gamma);
  fn(prefix + ".act.zeta", u.act.zeta);
  fn(prefix + ".act.beta", u.act.beta);
}

template <class T, class F>
void visit_plain_conv(PlainBinConvT<T>& conv, const std::string& prefix, F& fn) {
  fn(prefix + ".w_f", conv.w_f);
  fn(prefix + ".alpha", conv.alpha);
}

template <class T, class F>
void visit_basic_block(BasicBlockT<T>& block, const std::string& prefix, F& fn) {
  fn(prefix + ".ln.gamma", block.ln_gamma);
  fn(prefix + ".ln.beta", block.ln_beta);
  visit_plain_conv(block.inc, prefix + ".inc", fn);
  visit_s2bconv(block.conv, prefix + ".conv", fn);
  visit_plain_conv(block.dec, prefix + ".dec", fn);
}

}  // namespace netdetail

/// Enumerates every trainable parameter with a stable name, in a fixed order.
template <class T, class F>
void visit_params(S2BNetModelT<T>& m, F fn) {
  fn(std::string("head.w"), m.head_w);
  fn(std::string("head.b"), m.head_b);
  netdetail::visit_s2bconv(m.head_unit, "head_s2b", fn);
  for (size_t i = 0; i < m.encoders.size(); ++i) {
    const std::string prefix = "enc" + std::to_string(i);
    netdetail::visit_basic_block(m.encoders[i].block, prefix + ".block", fn);
    netdetail::visit_plain_conv(m.encoders[i].down, prefix + ".down", fn);
  }
  netdetail::visit_basic_block(m.bottleneck, "bottleneck", fn);
  for (size_t i = 0; i < m.decoders.size(); ++i) {
    const std::string prefix =
        "dec" + std::to_string(m.decoders.size() - 1 - i);
    netdetail::visit_plain_conv(m.decoders[i].up, prefix + ".up", fn);
    netdetail::visit_plain_conv(m.decoders[i].fuse, prefix + ".fuse", fn);
    netdetail::visit_basic_block(m.decoders[i].block, prefix + ".block", fn);
  }
  netdetail::visit_s2bconv(m.tail_unit, "tail_s2b", fn);
  fn(std::string("tail.w"), m.tail_w);
  fn(std::string("tail.b"), m.tail_b);
}

template <class T>
int64_t count_params(S2BNetModelT<T>& m) {
  int64_t total = 0;
  visit_params(m, [&](const std::string&, TensorT<T>& t) { total += t.numel(); });
  return total;
}

/// The architecture keeps exactly two convolutions at full precision.
template <class T>
int64_t count_full_precision_convs(const S2BNetModelT<T>& m) {
  int64_t count = 0;
  for (const auto& info : m.plan)
    if (info.kind == LayerKind::Conv && !info.binarized) ++count;
  return count;
}

}  // namespace s2b
