// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace egiinet {

std::vector<double> image_token_attention_mass(const std::vector<ad::Mat>& cross_heads) {
  if (cross_heads.empty()) {
    throw std::invalid_argument("image_token_attention_mass: no attention maps");
  }
  const long n = cross_heads[0].cols();
  std::vector<double> mass(static_cast<size_t>(n), 0.0);
  for (const ad::Mat& head : cross_heads) {
    if (head.cols() != n) {
      throw std::invalid_argument("image_token_attention_mass: inconsistent head shapes");
    }
    for (long j = 0; j < n; ++j) mass[static_cast<size_t>(j)] += head.col(j).sum();
  }
  const double inv_heads = 1.0 / static_cast<double>(cross_heads.size());
  for (double& m : mass) m *= inv_heads;
  return mass;
}

ImageView attention_heatmap(const std::vector<double>& masses, int grid_h, int grid_w, int out_h,
                            int out_w) {
  if (static_cast<int>(masses.size()) != grid_h * grid_w) {
    throw std::invalid_argument("attention_heatmap: mass count does not match grid");
  }
  const double lo = *std::min_element(masses.begin(), masses.end());
  const double hi = *std::max_element(masses.begin(), masses.end());
  const double range = hi - lo;

  auto grid_at = [&](int gy, int gx) {
    gy = std::clamp(gy, 0, grid_h - 1);
    gx = std::clamp(gx, 0, grid_w - 1);
    const double m = masses[static_cast<size_t>(gy) * grid_w + gx];
    return range < 1e-15 ? 0.0 : (m - lo) / range;
  };

  ImageView heat = ImageView::zeros(out_h, out_w);
  const double sy = static_cast<double>(grid_h) / out_h;
  const double sx = static_cast<double>(grid_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double gy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(gy));
    const double fy = gy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double gx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(gx));
      const double fx = gx - x0;
      const double v = (1 - fy) * ((1 - fx) * grid_at(y0, x0) + fx * grid_at(y0, x0 + 1)) +
                       fy * ((1 - fx) * grid_at(y0 + 1, x0) + fx * grid_at(y0 + 1, x0 + 1));
      for (int ch = 0; ch < 3; ++ch) heat.at(y, x, ch) = v;
    }
  }
  return heat;
}

ImageView overlay_heatmap(const ImageView& view, const ImageView& heat) {
  if (view.h != heat.h || view.w != heat.w) {
    throw std::invalid_argument("overlay_heatmap: size mismatch");
  }
  ImageView out = ImageView::zeros(view.h, view.w);
  for (int y = 0; y < view.h; ++y) {
    for (int x = 0; x < view.w; ++x) {
      const double v = heat.at(y, x, 0);
      // cold-to-hot ramp on top of the dimmed view
      const double r = v;
      const double g = 0.15 * v;
      const double b = 1.0 - v;
      out.at(y, x, 0) = std::clamp(0.55 * view.at(y, x, 0) + 0.45 * r, 0.0, 1.0);
      out.at(y, x, 1) = std::clamp(0.55 * view.at(y, x, 1) + 0.45 * g, 0.0, 1.0);
      out.at(y, x, 2) = std::clamp(0.55 * view.at(y, x, 2) + 0.45 * b, 0.0, 1.0);
    }
  }
  return out;
}

void visualize_attention(const EgiinetModel& model, const LoadedSample& sample,
                         const std::string& out_png) {
  if (model.config().variant == Variant::no_image) {
    throw std::runtime_error("visualize_attention: the no_image variant has no cross attention");
  }
  ad::Tape tape;
  Bound bound = Bound::bind(tape, model.params());
  ForwardOptions opts;
  opts.collect_attention = true;
  EgiinetModel::Forward f =
      model.forward(tape, bound, sample.partial, &sample.view, nullptr, opts);

  const std::vector<double> mass = image_token_attention_mass(f.cross_attention);
  const ModelConfig& cfg = model.config();
  const ImageView heat = attention_heatmap(mass, cfg.image_h / cfg.patch, cfg.image_w / cfg.patch,
                                           sample.view.h, sample.view.w);
  save_png(overlay_heatmap(sample.view, heat), out_png);
}

}  // namespace egiinet
