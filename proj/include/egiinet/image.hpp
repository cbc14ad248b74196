// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace egiinet {

/// H x W x C pixel grid with values in [0, 1]. Channel count is always 3;
/// grayscale sources are replicated on load.
struct ImageView {
  int h = 0;
  int w = 0;
  int c = 3;
  std::vector<double> pix;  // row-major (y, x, channel)

  static ImageView zeros(int h, int w) {
    ImageView img;
    img.h = h;
    img.w = w;
    img.pix.assign(static_cast<size_t>(h) * w * 3, 0.0);
    return img;
  }

  double at(int y, int x, int ch) const {
    return pix[(static_cast<size_t>(y) * w + x) * 3 + ch];
  }
  double& at(int y, int x, int ch) {
    return pix[(static_cast<size_t>(y) * w + x) * 3 + ch];
  }
};

/// 8-bit PNG, any color type; pixels mapped to [0,1].
ImageView load_png(const std::string& path);

/// Writes 8-bit RGB; values are clamped to [0,1] and quantized.
void save_png(const ImageView& img, const std::string& path);

}  // namespace egiinet
