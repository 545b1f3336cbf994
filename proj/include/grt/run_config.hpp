#pragma once

#include <string>

#include "grt/augment.hpp"
#include "grt/backbone.hpp"
#include "grt/losses.hpp"
#include "grt/optimizer.hpp"
#include "grt/synth.hpp"

namespace grt {

// One configuration file drives every command: key = value lines grouped
// under [section] headers, '#' comments, unknown keys rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  GRTConfig model;
  OptimConfig optim;
  double static_weight = 0.5;
  double moving_weight = 8.0;
  bool lovasz = true;
  AugmentConfig augment;

  std::string train_manifest;
  std::string val_manifest;
  bool feature_scaling_auto = true;

  std::size_t synth_scenes = 200;
  SyntheticSceneConfig synth;

  LossConfig loss_config() const {
    LossConfig cfg;
    cfg.class_weights.assign(model.num_classes, moving_weight);
    cfg.class_weights[0] = static_weight;
    cfg.lovasz_enabled = lovasz;
    return cfg;
  }
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
// Full echo of the effective configuration, parseable by parse_run_config.
std::string echo_run_config(const RunConfig& cfg);

}  // namespace grt
