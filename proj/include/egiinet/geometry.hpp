// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace egiinet {

using Vec3 = Eigen::Vector3d;

/// An ordered set of 3D points in unitless model space.
struct PointCloud {
  std::vector<Vec3> pts;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> p) : pts(std::move(p)) {}

  int size() const { return static_cast<int>(pts.size()); }
  bool empty() const { return pts.empty(); }
  const Vec3& operator[](int i) const { return pts[static_cast<size_t>(i)]; }
  Vec3& operator[](int i) { return pts[static_cast<size_t>(i)]; }
};

struct MetricReport {
  double cd_l1 = 0.0;
  double cd_l2 = 0.0;
  double fscore = 0.0;   // in [0, 1]
  double threshold_d = 0.0;
};

/// Bidirectional mean nearest-neighbor l2 distance. Each directional sum is
/// divided by 2x its own cloud size, so the value stays a mean for unequal
/// sizes and reduces to the usual single-N form when sizes match.
double chamfer_l1(const PointCloud& a, const PointCloud& b);

/// Sum of the two directional means of squared nearest-neighbor distances.
double chamfer_l2(const PointCloud& a, const PointCloud& b);

/// Harmonic-mean combination 2XY/(X+Y) of the two directional fractions of
/// points whose nearest-neighbor squared distance is strictly below d.
/// Returns 0 when both fractions are 0.
double fscore(const PointCloud& a, const PointCloud& b, double d);

/// Greedy farthest-point sampling. First pick is start_index; each next pick
/// maximizes the minimum distance to the already-selected set, ties broken by
/// lowest index. Deterministic given (pc, k, start_index).
std::vector<int> fps(const PointCloud& pc, int k, int start_index = 0);

/// Fixed-width clusters: for each center, up to max_k point indices within
/// `radius` (center first, then ascending index). Short clusters are padded
/// by repeating the center index.
std::vector<std::vector<int>> ball_query(const PointCloud& pc,
                                         const std::vector<int>& centers,
                                         double radius, int max_k);

/// Exact nearest-neighbor l2 distances by exhaustive pairwise scan.
struct NnDistances {
  std::vector<double> a_to_b;
  std::vector<double> b_to_a;
};
NnDistances nn_brute(const PointCloud& a, const PointCloud& b);

MetricReport evaluate_pair(const PointCloud& a, const PointCloud& b, double d);

// Plain-text cloud format: one "x y z" triple per line, whitespace-separated.
// Loading rejects NaN/Inf coordinates and malformed lines.
PointCloud load_cloud(const std::string& path);
void save_cloud(const PointCloud& pc, const std::string& path);

}  // namespace egiinet
