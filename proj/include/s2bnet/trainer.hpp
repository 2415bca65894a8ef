#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2bnet/checkpoint.hpp"
#include "s2bnet/config_json.hpp"
#include "s2bnet/data.hpp"
#include "s2bnet/metrics.hpp"
#include "s2bnet/network.hpp"
#include "s2bnet/ops.hpp"
#include "s2bnet/optim.hpp"
#include "s2bnet/trainer_config.hpp"

namespace s2b {

struct LossRow {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0;
  double loss = 0;
  bool skipped = false;
};

struct TrainResult {
  double initial_l1 = 0;
  double final_l1 = 0;
  std::vector<LossRow> curve;
  int64_t steps_run = 0;
  std::string final_checkpoint;
};

namespace traindetail {

inline void assemble_batch(const data::Dataset& ds, const std::vector<int64_t>& idx,
                           Tensor& pan, Tensor& lrms, Tensor& gt) {
  const int64_t b = static_cast<int64_t>(idx.size());
  const auto& first = ds[static_cast<size_t>(idx[0])];
  const int64_t h = first.pan.dim(1), w = first.pan.dim(2);
  const int64_t lh = first.lrms.dim(1), lw = first.lrms.dim(2);
  pan = Tensor::zeros({b, 1, h, w});
  lrms = Tensor::zeros({b, kMsBands, lh, lw});
  gt = Tensor::zeros({b, kMsBands, h, w});
  for (int64_t i = 0; i < b; ++i) {
    const auto& p = ds[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    std::copy_n(p.pan.data(), p.pan.numel(), pan.data() + i * h * w);
    std::copy_n(p.lrms.data(), p.lrms.numel(),
                lrms.data() + i * kMsBands * lh * lw);
    std::copy_n(p.gt.data(), p.gt.numel(), gt.data() + i * kMsBands * h * w);
  }
}

inline std::vector<int64_t> epoch_permutation(int64_t count, uint64_t seed,
                                              int64_t epoch) {
  std::vector<int64_t> perm(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) perm[static_cast<size_t>(i)] = i;
  rng::Engine g = rng::make_stream(seed, static_cast<uint64_t>(epoch));
  rng::shuffle(perm.begin(), perm.end(), g);
  return perm;
}

inline std::string step_dir(const std::string& run_dir, int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%07lld", static_cast<long long>(step));
  return run_dir + "/checkpoints/" + buf;
}

}  // namespace traindetail

/// Single-image fusion at inference time.
inline Tensor infer_pair(const S2BNetModel& model, const data::ScenePair& pair) {
  std::vector<int64_t> idx{0};
  data::Dataset one{pair};
  Tensor pan, lrms, gt_unused;
  data::ScenePair copy = pair;
  if (!copy.has_gt())
    copy.gt = Tensor::zeros({kMsBands, pair.pan.dim(1), pair.pan.dim(2)});
  data::Dataset tmp{copy};
  traindetail::assemble_batch(tmp, idx, pan, lrms, gt_unused);
  Tensor out = forward<float>(nullptr, model, pan, lrms);
  Tensor img = Tensor::zeros({kMsBands, pair.pan.dim(1), pair.pan.dim(2)});
  std::copy_n(out.data(), img.numel(), img.data());
  return img;
}

/// Mean L1 between fused outputs and ground truth over a dataset.
inline double dataset_l1(const S2BNetModel& model, const data::Dataset& ds) {
  check_value(!ds.empty(), "dataset_l1: empty dataset");
  double acc = 0.0;
  for (const auto& pair : ds) {
    check_value(pair.has_gt(), "dataset_l1: pair lacks ground truth");
    const Tensor fused = infer_pair(model, pair);
    double l1 = 0.0;
    for (int64_t i = 0; i < fused.numel(); ++i)
      l1 += std::abs(static_cast<double>(fused.data()[i]) - pair.gt.data()[i]);
    acc += l1 / static_cast<double>(fused.numel());
  }
  return acc / static_cast<double>(ds.size());
}

/// L1 training loop with Adam and the stepped learning-rate decay.
/// Deterministic for a fixed seed: shuffles are derived from (seed, epoch),
/// so resuming from (params, optimizer state, step) continues the exact
/// trajectory. Pass run_dir = "" to skip all file output.
inline TrainResult train(S2BNetModel& model, const data::Dataset& ds,
                         const TrainConfig& cfg, const std::string& run_dir,
                         const AdamState* resume = nullptr, int64_t start_step = 0) {
  validate(cfg);
  check_value(!ds.empty(), "train: dataset is empty");
  const int64_t h = ds.front().pan.dim(1), w = ds.front().pan.dim(2);
  for (const auto& pair : ds) {
    check_value(pair.has_gt(), "train: every pair needs ground truth");
    check_shape(pair.pan.dim(1) == h && pair.pan.dim(2) == w,
                "train: all pairs must share one shape");
    check_shape(pair.gt.dim(1) == h && pair.gt.dim(2) == w,
                "train: ground truth extent mismatch");
  }
  const int64_t count = static_cast<int64_t>(ds.size());
  const int64_t steps_per_epoch = (count + cfg.batch - 1) / cfg.batch;
  const int64_t total_steps =
      cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;
  check_value(total_steps > start_step, "train: no steps to run");

  std::vector<Tensor*> params;
  std::vector<size_t> alpha_params;
  visit_params(model, [&](const std::string& name, Tensor& t) {
    if (name.size() >= 6 && name.compare(name.size() - 6, 6, ".alpha") == 0)
      alpha_params.push_back(params.size());
    params.push_back(&t);
  });
  AdamState state = resume ? *resume : make_adam_state(params);
  check_shape(state.m.size() == params.size(), "train: optimizer state mismatch");

  const bool persist = !run_dir.empty();
  std::ofstream loss_log;
  if (persist) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir + "/checkpoints", ec);
    if (ec) throw IoError("cannot create run directory: " + run_dir);
    nlohmann::json config_echo;
    config_echo["schema_version"] = 1;
    config_echo["model"] = model.config;
    config_echo["train"] = cfg;
    config_echo["model_seed"] = model.seed;
    std::ofstream cf(run_dir + "/config.json");
    if (!cf) throw IoError("cannot write run config in " + run_dir);
    cf << config_echo.dump(2) << '\n';
    loss_log.open(run_dir + "/loss.jsonl",
                  start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!loss_log) throw IoError("cannot open loss log in " + run_dir);
  }

  TrainResult result;
  result.initial_l1 = dataset_l1(model, ds);

  for (int64_t step = start_step; step < total_steps; ++step) {
    const int64_t epoch = step / steps_per_epoch;
    const int64_t pos = step % steps_per_epoch;
    const auto perm = traindetail::epoch_permutation(count, cfg.seed, epoch);
    std::vector<int64_t> batch_idx(
        perm.begin() + pos * cfg.batch,
        perm.begin() + std::min<int64_t>(count, (pos + 1) * cfg.batch));
    Tensor pan, lrms, gt;
    traindetail::assemble_batch(ds, batch_idx, pan, lrms, gt);
    const double lr =
        cfg.lr0 * std::pow(cfg.decay,
                           static_cast<double>(epoch / cfg.decay_interval_epochs));

    for (Tensor* p : params) {
      p->grad();  // allocate
      p->zero_grad();
    }
    Tape tape;
    Tensor out = forward<float>(&tape, model, pan, lrms);
    Tensor loss = ops::l1_loss<float>(&tape, out, gt);
    tape.backward(loss);

    LossRow row;
    row.step = step;
    row.epoch = epoch;
    row.lr = lr;
    row.loss = static_cast<double>(loss.item());
    row.skipped = !adam_step(params, state, lr, cfg.beta1, cfg.beta2, cfg.eps);
    if (!row.skipped)
      for (size_t ai : alpha_params) {
        float& a = params[ai]->data()[0];
        if (a < static_cast<float>(cfg.alpha_floor))
          a = static_cast<float>(cfg.alpha_floor);
      }
    result.curve.push_back(row);
    if (persist) {
      nlohmann::json jrow{{"step", row.step},
                          {"epoch", row.epoch},
                          {"lr", row.lr},
                          {"loss", row.loss}};
      if (row.skipped) jrow["skipped"] = true;
      loss_log << jrow.dump() << '\n';
      loss_log.flush();
      if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
          step + 1 < total_steps)
        save_checkpoint(traindetail::step_dir(run_dir, step + 1), model, step + 1,
                        (step + 1) / steps_per_epoch, &state);
    }
  }
  result.steps_run = total_steps - start_step;
  result.final_l1 = dataset_l1(model, ds);

  if (persist) {
    result.final_checkpoint = traindetail::step_dir(run_dir, total_steps);
    save_checkpoint(result.final_checkpoint, model, total_steps,
                    total_steps / steps_per_epoch, &state);
    nlohmann::json agg;
    int64_t n_pairs = 0;
    for (const auto& pair : ds) {
      const Tensor fused = infer_pair(model, pair);
      const auto report = metrics::evaluate_pair(fused, pair);
      for (const auto& [key, value] : report.values) {
        agg[key] = agg.value(key, 0.0) + value;
      }
      ++n_pairs;
    }
    nlohmann::json final_metrics;
    final_metrics["schema_version"] = 1;
    final_metrics["pairs"] = n_pairs;
    final_metrics["initial_l1"] = result.initial_l1;
    final_metrics["final_l1"] = result.final_l1;
    for (auto& [key, value] : agg.items())
      final_metrics[key] = value.get<double>() / static_cast<double>(n_pairs);
    std::ofstream mf(run_dir + "/final_metrics.json");
    if (!mf) throw IoError("cannot write final metrics in " + run_dir);
    mf << final_metrics.dump(2) << '\n';
  }
  return result;
}

}  // namespace s2b
