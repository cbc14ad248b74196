// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egiinet/autograd.hpp"
#include "egiinet/fusion.hpp"
#include "egiinet/geometry.hpp"
#include "egiinet/image.hpp"
#include "egiinet/interaction.hpp"
#include "egiinet/model_config.hpp"
#include "egiinet/params.hpp"
#include "egiinet/tokenize.hpp"

namespace egiinet {

ad::Mat cloud_to_mat(const PointCloud& pc);
PointCloud mat_to_cloud(const ad::Mat& m);

struct ForwardOptions {
  bool collect_attention = false;
};

/// The completion network: unified tokenization, a weight-shared encoder
/// stack, a weight-shared transfer stack supervised by the Gram-alignment
/// losses, single cross-attention fusion, and a point decoder. The variant
/// rewires exactly the documented subgraph and nothing else.
class EgiinetModel {
 public:
  struct Forward {
    ad::Var completed_node;                // n_out x 3
    ad::Mat completed;
    ad::Mat pc_anchors;                    // N' x 3 sampling centers
    LossBundle bundle;                     // filled when a target is given
    ad::Var loss_node;                     // backward target, variant-aware
    std::vector<ad::Mat> self_attention;   // row-stochastic maps, all stacks
    std::vector<ad::Mat> cross_attention;  // one per head; empty for no_image
  };

  explicit EgiinetModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  void init_params(uint64_t seed);

  /// Builds the forward graph on the given tape. `view` may be null only for
  /// the no_image variant; `target` enables the loss bundle.
  Forward forward(ad::Tape& tape, const Bound& bound, const PointCloud& partial,
                  const ImageView* view, const ad::Mat* target,
                  const ForwardOptions& opts = {}) const;

  /// Evaluation-mode completion on an internally managed tape.
  PointCloud complete(const PointCloud& partial, const ImageView* view) const;

  /// Encoder stack applied to raw token values for the given modality.
  ad::Mat encode_tokens(const ad::Mat& tokens, TokenSequence::Modality m) const;
  /// Transfer stack applied to encoder outputs for the given modality.
  ad::Mat transfer_tokens(const ad::Mat& tokens, TokenSequence::Modality m) const;
  /// Per-block, per-head attention maps of the encoder stack.
  std::vector<std::vector<ad::Mat>> encoder_attention_maps(const ad::Mat& tokens,
                                                           TokenSequence::Modality m) const;

  std::string sfe_prefix(TokenSequence::Modality m) const;
  std::string sft_prefix(TokenSequence::Modality m) const;

 private:
  ModelConfig cfg_;
  ParamStore store_;

  void register_params();
};

}  // namespace egiinet
