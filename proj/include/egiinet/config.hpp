// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "egiinet/model_config.hpp"
#include "egiinet/synth.hpp"

namespace egiinet {

/// Everything one run needs: model hyperparameters, optimizer settings, the
/// transfer-loss weight, seeds, dataset paths, and the ablation variant.
struct RunConfig {
  ModelConfig model;

  double lr = 1e-4;
  int epochs = 30;
  int batch_size = 8;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  int train_samples = 256;
  int val_samples = 64;
  int n_complete = 1024;
  std::vector<ShapeFamily> families;  // dataset family cycle; empty = all

  std::string data_manifest;
  std::string out_dir;

  void validate() const;
};

/// Key = value text format; '#' starts a comment, unknown keys are errors.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);
void write_run_config(const RunConfig& cfg, std::ostream& out);

/// EGIINET_SEED, when set, overrides the configured seed.
void apply_env_seed_override(RunConfig& cfg);

DatasetConfig dataset_config_from(const RunConfig& cfg, int n_samples);

}  // namespace egiinet
