// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace egiinet {

/// Controlled model modifications used by the ablation harness.
enum class Variant { full, no_sharing, no_ftloss, no_sftnet, no_image };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  int n_tokens = 64;        // tokens per modality
  int channels = 128;       // token width
  int sfe_blocks = 4;       // encoder depth
  int sft_blocks = 2;       // transfer-stack depth
  int dec_blocks = 2;       // decoder self-attention depth
  int heads = 4;
  int patch = 8;            // image patch edge, kernel == stride
  int image_h = 64;
  int image_w = 64;
  int n_out = 1024;         // completed cloud size
  int pc_input = 512;       // expected partial-cloud size
  int stage1_centers = 128; // first downsampling stage
  int stage1_channels = 64;
  int pos_hidden = 64;
  int head_hidden = 256;    // generation-head hidden width
  double radius1 = 0.2;
  double radius2 = 0.4;
  int max_k = 16;
  double alpha = 0.01;      // transfer-loss weight
  Variant variant = Variant::full;

  /// Throws std::invalid_argument when dimensions are inconsistent.
  void validate() const;
};

}  // namespace egiinet
