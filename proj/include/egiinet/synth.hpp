// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egiinet/geometry.hpp"
#include "egiinet/image.hpp"

namespace egiinet {

enum class ShapeFamily { sphere, box, cylinder, torus, composite };

ShapeFamily family_from_string(const std::string& s);
std::string to_string(ShapeFamily f);
const std::vector<ShapeFamily>& all_families();

/// n surface points of a procedurally parameterized shape, deterministic per
/// seed. Every family is constructed to fit the unit cube centered at the
/// origin by its analytic bounds.
PointCloud sample_shape(ShapeFamily family, int n, uint64_t seed);

/// Keep flags under the half-space criterion: a point survives when it lies
/// on the viewer-facing side of the plane through the origin normal to the
/// view direction.
std::vector<char> occlusion_mask(const PointCloud& pc, double azimuth, double elevation);

/// The retained sub-cloud for the given viewpoint.
PointCloud occlude_view(const PointCloud& pc, double azimuth, double elevation);

/// Orthographic point-splat rendering with depth-shaded intensities in
/// (0, 1]; background stays 0. Nearer points overwrite farther ones.
ImageView render_view(const PointCloud& pc, double azimuth, double elevation, int h, int w);

struct DatasetConfig {
  int n_samples = 0;
  int n_complete = 1024;
  int partial_size = 512;
  int image_h = 64;
  int image_w = 64;
  uint64_t seed = 1;
  /// Families cycled over the samples; empty means all of them.
  std::vector<ShapeFamily> families;
};

/// One fully generated sample, before any file I/O.
struct BuiltSample {
  PointCloud complete;
  PointCloud partial;
  ImageView view;
  double occl_azimuth = 0.0;
  double occl_elevation = 0.0;
  double view_azimuth = 0.0;
  double view_elevation = 0.0;
  ShapeFamily family = ShapeFamily::sphere;
  uint64_t seed = 0;
};

/// Deterministic sample construction: shape, occlusion viewpoint with a
/// retention fraction in [0.25, 0.75], partial resampled to partial_size,
/// and a guidance view rendered from a viewpoint at least 30 degrees of
/// azimuth away from the occlusion viewpoint.
BuiltSample make_sample(const DatasetConfig& cfg, ShapeFamily family, uint64_t sample_seed);

struct SampleRecord {
  int id = 0;
  std::string complete_path;  // relative to the manifest directory
  std::string partial_path;
  std::string view_path;
  double view_azimuth = 0.0;
  double view_elevation = 0.0;
  ShapeFamily family = ShapeFamily::sphere;
  uint64_t seed = 0;
};

/// Writes per-sample clouds (text), views (PNG), and `manifest.txt` under
/// out_dir. Fully reproducible from (cfg, cfg.seed); rebuilding yields
/// byte-identical files.
std::vector<SampleRecord> build_dataset(const DatasetConfig& cfg, const std::string& out_dir);

std::vector<SampleRecord> load_manifest(const std::string& manifest_path);
std::string manifest_path(const std::string& out_dir);

}  // namespace egiinet
