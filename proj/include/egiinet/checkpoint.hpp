// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "egiinet/config.hpp"
#include "egiinet/model.hpp"

namespace egiinet {

/// Checkpoint directory layout: a plain-text `manifest.txt` (format version,
/// step counter, RNG state, config snapshot, and the parameter table) next to
/// `params.bin`, the raw little-endian doubles in registration order.
/// Round-tripping reproduces evaluation outputs bitwise.
void save_checkpoint(const std::string& dir, const EgiinetModel& model, const RunConfig& cfg,
                     int64_t step, const std::string& rng_state);

struct LoadedCheckpoint {
  RunConfig config;
  int64_t step = 0;
  std::string rng_state;
  std::unique_ptr<EgiinetModel> model;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace egiinet
