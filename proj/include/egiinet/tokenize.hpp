// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "egiinet/autograd.hpp"
#include "egiinet/geometry.hpp"
#include "egiinet/image.hpp"
#include "egiinet/model_config.hpp"
#include "egiinet/params.hpp"

namespace egiinet {

/// N' x C' token matrix for one modality of one sample. Point-cloud token
/// rows are anchored to the coordinates of their sampling centers.
struct TokenSequence {
  enum class Modality { image, pointcloud };
  ad::Var tokens;
  Modality modality = Modality::image;
  ad::Mat anchors;  // N' x 3 for pointcloud tokens, empty for image tokens
};

/// Intermediate sampling structure of the point-cloud tokenizer, exposed for
/// inspection and tests.
struct PcTokenizeTrace {
  PointCloud canonical;                       // lexicographically sorted input
  std::vector<int> stage1_centers;            // indices into canonical
  std::vector<std::vector<int>> stage1_clusters;
  std::vector<int> stage2_centers;            // indices into stage-1 centers
  std::vector<std::vector<int>> stage2_clusters;
};

/// One token per non-overlapping patch (kernel == stride == patch edge),
/// patches scanned row-major. Token count must equal the configured N'.
TokenSequence tokenize_image(ad::Tape& t, const Bound& b, const ModelConfig& cfg,
                             const ImageView& img);

/// Cascaded farthest-point-sampling stages with ball-query clusters; each
/// cluster is embedded from member-minus-center offsets and max-pooled. The
/// final centers provide both the positional embedding input and the token
/// anchors. Input order does not matter: points are canonicalized by a
/// lexicographic sort and sampling starts at index 0.
TokenSequence tokenize_pointcloud(ad::Tape& t, const Bound& b, const ModelConfig& cfg,
                                  const PointCloud& pc, PcTokenizeTrace* trace = nullptr);

/// Pointwise two-layer map from center coordinates to token width.
ad::Var positional_embed(ad::Tape& t, const Bound& b, const ad::Mat& centers);

void register_tokenizers(ParamStore& store, const ModelConfig& cfg, bool with_image);

}  // namespace egiinet
