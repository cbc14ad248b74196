// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "egiinet/autograd.hpp"
#include "egiinet/image.hpp"
#include "egiinet/model.hpp"
#include "egiinet/train.hpp"

namespace egiinet {

/// Received-attention mass per image token: cross-attention weights summed
/// over the point-cloud query rows and averaged over heads. The masses total
/// N' because every query row distributes exactly one unit of weight.
std::vector<double> image_token_attention_mass(const std::vector<ad::Mat>& cross_heads);

/// Token masses on the patch grid, bilinearly upsampled to the view size and
/// min-max normalized to [0, 1].
ImageView attention_heatmap(const std::vector<double>& masses, int grid_h, int grid_w, int out_h,
                            int out_w);

/// Heatmap blended over the input view.
ImageView overlay_heatmap(const ImageView& view, const ImageView& heat);

/// Runs the model on one sample, projects the cross-attention mass onto the
/// view, and writes the overlay PNG.
void visualize_attention(const EgiinetModel& model, const LoadedSample& sample,
                         const std::string& out_png);

}  // namespace egiinet
