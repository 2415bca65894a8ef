#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2bnet/config_json.hpp"
#include "s2bnet/io.hpp"
#include "s2bnet/network.hpp"
#include "s2bnet/optim.hpp"

namespace s2b {

struct Checkpoint {
  S2BNetModel model;
  int64_t step = 0;
  int64_t epoch = 0;
  bool has_adam = false;
  AdamState adam;
};

/// Checkpoint = manifest (config, seed, step) + one tensor container per
/// parameter; optimizer moments ride along so a resumed run continues the
/// exact trajectory.
inline void save_checkpoint(const std::string& dir, S2BNetModel& model, int64_t step,
                            int64_t epoch, const AdamState* adam = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir + "/params", ec);
  if (ec) throw IoError("cannot create checkpoint directory: " + dir);

  std::vector<std::string> names;
  visit_params(model, [&](const std::string& name, Tensor& t) {
    io::save_tensor(dir + "/params/" + name + ".s2bt", t);
    names.push_back(name);
  });
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["config"] = model.config;
  manifest["seed"] = model.seed;
  manifest["step"] = step;
  manifest["epoch"] = epoch;
  manifest["params"] = names;
  manifest["adam"] = nlohmann::json{{"present", adam != nullptr},
                                    {"t", adam ? adam->t : 0}};
  if (adam) {
    check_shape(adam->m.size() == names.size(),
                "save_checkpoint: optimizer state size mismatch");
    fs::create_directories(dir + "/adam_m", ec);
    fs::create_directories(dir + "/adam_v", ec);
    for (size_t i = 0; i < names.size(); ++i) {
      io::save_tensor(dir + "/adam_m/" + names[i] + ".s2bt",
                      Tensor::from({static_cast<int64_t>(adam->m[i].size())},
                                   std::vector<float>(adam->m[i])));
      io::save_tensor(dir + "/adam_v/" + names[i] + ".s2bt",
                      Tensor::from({static_cast<int64_t>(adam->v[i].size())},
                                   std::vector<float>(adam->v[i])));
    }
  }
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw IoError("cannot open checkpoint manifest: " + dir + "/manifest.json");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest in " + dir + ": " + e.what());
  }
  Checkpoint ckpt;
  const S2BNetConfig config = manifest.at("config").get<S2BNetConfig>();
  const uint64_t seed = manifest.at("seed").get<uint64_t>();
  ckpt.model = build<float>(config, seed);
  ckpt.step = manifest.value("step", int64_t{0});
  ckpt.epoch = manifest.value("epoch", int64_t{0});

  const auto names = manifest.at("params").get<std::vector<std::string>>();
  std::map<std::string, Tensor*> by_name;
  visit_params(ckpt.model, [&](const std::string& name, Tensor& t) {
    by_name[name] = &t;
  });
  if (names.size() != by_name.size())
    throw IoError("checkpoint parameter list does not match the architecture in " + dir);
  for (const auto& name : names) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError("checkpoint has unknown parameter '" + name + "' in " + dir);
    Tensor loaded = io::load_tensor(dir + "/params/" + name + ".s2bt");
    check_shape(loaded.numel() == it->second->numel(),
                "checkpoint parameter '" + name + "' has wrong size");
    std::copy_n(loaded.data(), loaded.numel(), it->second->data());
  }
  if (manifest.contains("adam") && manifest["adam"].value("present", false)) {
    ckpt.has_adam = true;
    ckpt.adam.t = manifest["adam"].value("t", int64_t{0});
    for (const auto& name : names) {
      Tensor m = io::load_tensor(dir + "/adam_m/" + name + ".s2bt");
      Tensor v = io::load_tensor(dir + "/adam_v/" + name + ".s2bt");
      ckpt.adam.m.push_back(m.vec());
      ckpt.adam.v.push_back(v.vec());
    }
  }
  return ckpt;
}

}  // namespace s2b
