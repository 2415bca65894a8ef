#pragma once

#include <cstdint>

#include "s2bnet/common.hpp"

namespace s2b {

/// Training hyperparameters. Defaults follow the reference recipe: Adam with
/// beta1 = 0.9, beta2 = 0.999, initial learning rate 1.5e-3 multiplied by
/// 0.85 every 100 epochs, re-expressed per step at desk scale.
struct TrainConfig {
  double lr0 = 1.5e-3;
  double decay = 0.85;
  int64_t decay_interval_epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t batch = 4;
  int64_t epochs = 0;        // optional epoch budget
  int64_t max_steps = 300;   // step budget; 0 derives the budget from epochs
  uint64_t seed = 0;
  int64_t checkpoint_every = 0;  // periodic checkpoints in steps, 0 = final only
  double alpha_floor = 1e-4;     // STE slopes are reprojected above this
};

inline void validate(const TrainConfig& cfg) {
  check_value(cfg.lr0 > 0.0, "train config: lr0 must be positive");
  check_value(cfg.decay > 0.0 && cfg.decay <= 1.0,
              "train config: decay must lie in (0, 1]");
  check_value(cfg.decay_interval_epochs >= 1,
              "train config: decay interval must be >= 1");
  check_value(cfg.batch >= 1, "train config: batch must be >= 1");
  check_value(cfg.max_steps > 0 || cfg.epochs > 0,
              "train config: either max_steps or epochs must be set");
  check_value(cfg.alpha_floor > 0.0, "train config: alpha floor must be positive");
}

}  // namespace s2b
