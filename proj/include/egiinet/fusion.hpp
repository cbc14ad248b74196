// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "egiinet/autograd.hpp"
#include "egiinet/model_config.hpp"
#include "egiinet/params.hpp"

namespace egiinet {

/// Result of the single cross-attention fusion: point-cloud tokens enriched
/// with image information, plus the per-head attention weights (queries are
/// point-cloud tokens, keys/values are image tokens).
struct FusedFeature {
  ad::Var tokens;
  std::vector<ad::Var> attention;  // heads entries of N' x N'
};

/// Exactly one cross-attention application with a residual connection back
/// to the point-cloud tokens.
FusedFeature fuse(ad::Tape& t, const Bound& b, int heads, ad::Var f_pc, ad::Var f_img);

/// Self-attention blocks over the fused tokens followed by a shared two-layer
/// generation head that expands every token into n_out / n_tokens points.
ad::Var decode(ad::Tape& t, const Bound& b, const ModelConfig& cfg, ad::Var fused,
               std::vector<ad::Var>* attn_sink = nullptr);

void register_fusion(ParamStore& store, const ModelConfig& cfg);
void register_decoder(ParamStore& store, const ModelConfig& cfg);

}  // namespace egiinet
