#pragma once

#include <cstdint>

#include "json.hpp"
#include "s2bnet/gabor.hpp"
#include "s2bnet/network.hpp"
#include "s2bnet/trainer_config.hpp"

namespace s2b {

inline void to_json(nlohmann::json& j, const GaborSpec& g) {
  j = nlohmann::json{{"freqs", g.freqs},
                     {"thetas", g.thetas},
                     {"psi", g.psi},
                     {"gamma_aspect", g.gamma_aspect},
                     {"sigma_divisor", g.sigma_divisor}};
}

inline void from_json(const nlohmann::json& j, GaborSpec& g) {
  GaborSpec defaults;
  g.freqs = j.value("freqs", defaults.freqs);
  g.thetas = j.value("thetas", defaults.thetas);
  g.psi = j.value("psi", defaults.psi);
  g.gamma_aspect = j.value("gamma_aspect", defaults.gamma_aspect);
  g.sigma_divisor = j.value("sigma_divisor", defaults.sigma_divisor);
}

inline void to_json(nlohmann::json& j, const S2BNetConfig& c) {
  j = nlohmann::json{{"base_channels", c.base_channels},
                     {"stages", c.stages},
                     {"kernel", c.kernel},
                     {"srm_reduction", c.srm_reduction},
                     {"scale_ratio", c.scale_ratio},
                     {"use_gsfa", c.use_gsfa},
                     {"use_srm", c.use_srm},
                     {"gabor", c.gabor}};
}

inline void from_json(const nlohmann::json& j, S2BNetConfig& c) {
  S2BNetConfig defaults;
  c.base_channels = j.value("base_channels", defaults.base_channels);
  c.stages = j.value("stages", defaults.stages);
  c.kernel = j.value("kernel", defaults.kernel);
  c.srm_reduction = j.value("srm_reduction", defaults.srm_reduction);
  c.scale_ratio = j.value("scale_ratio", defaults.scale_ratio);
  c.use_gsfa = j.value("use_gsfa", defaults.use_gsfa);
  c.use_srm = j.value("use_srm", defaults.use_srm);
  c.gabor = j.value("gabor", defaults.gabor);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr0", c.lr0},
                     {"decay", c.decay},
                     {"decay_interval_epochs", c.decay_interval_epochs},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"batch", c.batch},
                     {"epochs", c.epochs},
                     {"max_steps", c.max_steps},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"alpha_floor", c.alpha_floor}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig defaults;
  c.lr0 = j.value("lr0", defaults.lr0);
  c.decay = j.value("decay", defaults.decay);
  c.decay_interval_epochs = j.value("decay_interval_epochs", defaults.decay_interval_epochs);
  c.beta1 = j.value("beta1", defaults.beta1);
  c.beta2 = j.value("beta2", defaults.beta2);
  c.eps = j.value("eps", defaults.eps);
  c.batch = j.value("batch", defaults.batch);
  c.epochs = j.value("epochs", defaults.epochs);
  c.max_steps = j.value("max_steps", defaults.max_steps);
  c.seed = j.value("seed", defaults.seed);
  c.checkpoint_every = j.value("checkpoint_every", defaults.checkpoint_every);
  c.alpha_floor = j.value("alpha_floor", defaults.alpha_floor);
}

}  // namespace s2b
