#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "s2bnet/common.hpp"

namespace s2b {

// Binarization discounts: a binarized conv contributes its full-precision
// FLOP count / 64 and its weight count / 32.
inline constexpr double kBinFlopDivisor = 64.0;
inline constexpr double kBinParamDivisor = 32.0;

enum class LayerKind {
  Conv,
  Linear,
  LayerNorm,
  RpRelu,
  Relu,
  Sigmoid,
  Tanh,
  GlobalAvgPool,
  ChannelAffine,
  Bilinear2x,
  Rescale,
  Add,
};

/// One cost-bearing step of the model, with enough geometry to price it for
/// any input resolution. in_div / out_div are spatial divisors relative to
/// the full (PAN) resolution.
struct LayerInfo {
  std::string name;
  LayerKind kind = LayerKind::Add;
  bool binarized = false;
  bool spatial = true;  // false: operates on [N,C] vectors
  int64_t cin = 0, cout = 0, k = 1, stride = 1;
  int64_t in_div = 1, out_div = 1;
  int64_t din = 0, dout = 0;       // Linear only
  int64_t extra_params = 0;        // full-precision parameters (alpha, LN, ...)
  int64_t bias_params = 0;         // adds one FLOP per output element
};

struct LayerCost {
  std::string name;
  bool binarized = false;
  double flops_f = 0, flops_b = 0;
  double params_f = 0, params_b = 0;
};

struct CostLedger {
  std::vector<LayerCost> rows;
  double flops_f = 0, flops_b = 0, params_f = 0, params_b = 0;

  double flops_total() const { return flops_f + flops_b; }
  double params_total() const { return params_f + params_b; }

  std::string table() const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "layer" << std::right << std::setw(6) << "bin"
       << std::setw(16) << "flops_f" << std::setw(16) << "flops_b" << std::setw(12)
       << "params_f" << std::setw(12) << "params_b" << '\n';
    for (const auto& r : rows)
      os << std::left << std::setw(28) << r.name << std::right << std::setw(6)
         << (r.binarized ? "yes" : "no") << std::setw(16) << std::fixed
         << std::setprecision(0) << r.flops_f << std::setw(16) << std::setprecision(2)
         << r.flops_b << std::setw(12) << std::setprecision(0) << r.params_f
         << std::setw(12) << std::setprecision(2) << r.params_b << '\n';
    os << std::left << std::setw(28) << "TOTAL" << std::right << std::setw(6) << ""
       << std::setw(16) << std::setprecision(0) << flops_f << std::setw(16)
       << std::setprecision(2) << flops_b << std::setw(12) << std::setprecision(0)
       << params_f << std::setw(12) << std::setprecision(2) << params_b << '\n';
    os << "flops total " << std::setprecision(2) << flops_total() << ", params total "
       << params_total() << '\n';
    return os.str();
  }
};

/// Prices a layer plan at the given input resolution. FLOP convention: one
/// multiply-accumulate counts as 2 operations; elementwise costs are counted
/// exactly (LayerNorm 7, RPReLU 3, ReLU 1, sigmoid/tanh 4, affine 2,
/// bilinear taps 8, rescale/add 1 per element).
inline CostLedger account(const std::vector<LayerInfo>& plan, int64_t n, int64_t h,
                          int64_t w, bool force_full_precision = false) {
  check_value(n >= 1 && h >= 1 && w >= 1, "account: input extents must be >= 1");
  CostLedger ledger;
  for (const auto& info : plan) {
    LayerCost row;
    row.name = info.name;
    row.binarized = info.binarized && !force_full_precision;
    const double out_elems =
        info.spatial ? static_cast<double>(n * info.cout * (h / info.out_div) *
                                           (w / info.out_div))
                     : static_cast<double>(n * info.cout);
    const double in_elems =
        info.spatial ? static_cast<double>(n * info.cin * (h / info.in_div) *
                                           (w / info.in_div))
                     : static_cast<double>(n * info.cin);
    switch (info.kind) {
      case LayerKind::Conv: {
        const double macs = out_elems * static_cast<double>(info.cin * info.k * info.k);
        const double weights = static_cast<double>(info.cout * info.cin * info.k * info.k);
        if (row.binarized) {
          row.flops_b += 2.0 * macs / kBinFlopDivisor;
          row.params_b += weights / kBinParamDivisor;
        } else {
          row.flops_f += 2.0 * macs;
          row.params_f += weights;
        }
        if (info.bias_params > 0) row.flops_f += out_elems;
        break;
      }
      case LayerKind::Linear: {
        row.flops_f += static_cast<double>(n) *
                       (2.0 * static_cast<double>(info.din * info.dout) +
                        static_cast<double>(info.dout));
        row.params_f += static_cast<double>(info.din * info.dout + info.dout);
        break;
      }
      case LayerKind::LayerNorm:
        row.flops_f += 7.0 * out_elems;
        break;
      case LayerKind::RpRelu:
        row.flops_f += 3.0 * out_elems;
        break;
      case LayerKind::Relu:
        row.flops_f += out_elems;
        break;
      case LayerKind::Sigmoid:
      case LayerKind::Tanh:
        row.flops_f += 4.0 * out_elems;
        break;
      case LayerKind::GlobalAvgPool:
        row.flops_f += in_elems;
        break;
      case LayerKind::ChannelAffine:
        row.flops_f += 2.0 * out_elems;
        break;
      case LayerKind::Bilinear2x:
        row.flops_f += 8.0 * out_elems;
        break;
      case LayerKind::Rescale:
      case LayerKind::Add:
        row.flops_f += out_elems;
        break;
    }
    row.params_f += static_cast<double>(info.extra_params + info.bias_params);
    ledger.rows.push_back(row);
    ledger.flops_f += row.flops_f;
    ledger.flops_b += row.flops_b;
    ledger.params_f += row.params_f;
    ledger.params_b += row.params_b;
  }
  return ledger;
}

}  // namespace s2b
