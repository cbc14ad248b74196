// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace egiinet {

namespace {

void require_nonempty(const PointCloud& a, const PointCloud& b, const char* op) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument(std::string(op) + ": point clouds must be non-empty");
  }
}

double min_sq_dist(const Vec3& p, const PointCloud& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& q : cloud.pts) {
    const double d = (p - q).squaredNorm();
    if (d < best) best = d;
  }
  return best;
}

}  // namespace

double chamfer_l1(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "chamfer_l1");
  double sum_a = 0.0;
  for (const Vec3& p : a.pts) sum_a += std::sqrt(min_sq_dist(p, b));
  double sum_b = 0.0;
  for (const Vec3& q : b.pts) sum_b += std::sqrt(min_sq_dist(q, a));
  return 0.5 * sum_a / a.size() + 0.5 * sum_b / b.size();
}

double chamfer_l2(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "chamfer_l2");
  double sum_a = 0.0;
  for (const Vec3& p : a.pts) sum_a += min_sq_dist(p, b);
  double sum_b = 0.0;
  for (const Vec3& q : b.pts) sum_b += min_sq_dist(q, a);
  return sum_a / a.size() + sum_b / b.size();
}

double fscore(const PointCloud& a, const PointCloud& b, double d) {
  require_nonempty(a, b, "fscore");
  if (!(d > 0.0)) throw std::invalid_argument("fscore: threshold d must be positive");
  int hits_a = 0;
  for (const Vec3& p : a.pts) {
    if (min_sq_dist(p, b) < d) ++hits_a;
  }
  int hits_b = 0;
  for (const Vec3& q : b.pts) {
    if (min_sq_dist(q, a) < d) ++hits_b;
  }
  const double x = static_cast<double>(hits_a) / a.size();
  const double y = static_cast<double>(hits_b) / b.size();
  if (x + y == 0.0) return 0.0;
  return 2.0 * x * y / (x + y);
}

std::vector<int> fps(const PointCloud& pc, int k, int start_index) {
  if (pc.empty()) throw std::invalid_argument("fps: empty point cloud");
  const int n = pc.size();
  if (k < 1 || k > n) throw std::invalid_argument("fps: k must be in [1, cloud size]");
  if (start_index < 0 || start_index >= n) {
    throw std::invalid_argument("fps: start_index out of range");
  }

  std::vector<int> selected;
  selected.reserve(static_cast<size_t>(k));
  selected.push_back(start_index);

  // min squared distance from each point to the selected set
  std::vector<double> min_sq(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    min_sq[static_cast<size_t>(i)] = (pc[i] - pc[start_index]).squaredNorm();
  }

  while (static_cast<int>(selected.size()) < k) {
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      // strict > keeps the lowest index on ties
      if (min_sq[static_cast<size_t>(i)] > best_d) {
        best_d = min_sq[static_cast<size_t>(i)];
        best = i;
      }
    }
    selected.push_back(best);
    for (int i = 0; i < n; ++i) {
      const double d = (pc[i] - pc[best]).squaredNorm();
      if (d < min_sq[static_cast<size_t>(i)]) min_sq[static_cast<size_t>(i)] = d;
    }
  }
  return selected;
}

std::vector<std::vector<int>> ball_query(const PointCloud& pc,
                                         const std::vector<int>& centers,
                                         double radius, int max_k) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball_query: radius must be positive");
  if (max_k < 1) throw std::invalid_argument("ball_query: max_k must be >= 1");
  const int n = pc.size();
  const double r2 = radius * radius;

  std::vector<std::vector<int>> clusters;
  clusters.reserve(centers.size());
  for (int c : centers) {
    if (c < 0 || c >= n) throw std::invalid_argument("ball_query: center index out of range");
    std::vector<int> cluster;
    cluster.reserve(static_cast<size_t>(max_k));
    cluster.push_back(c);
    for (int i = 0; i < n && static_cast<int>(cluster.size()) < max_k; ++i) {
      if (i == c) continue;
      if ((pc[i] - pc[c]).squaredNorm() <= r2) cluster.push_back(i);
    }
    while (static_cast<int>(cluster.size()) < max_k) cluster.push_back(c);
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

NnDistances nn_brute(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "nn_brute");
  NnDistances out;
  out.a_to_b.reserve(a.pts.size());
  for (const Vec3& p : a.pts) out.a_to_b.push_back(std::sqrt(min_sq_dist(p, b)));
  out.b_to_a.reserve(b.pts.size());
  for (const Vec3& q : b.pts) out.b_to_a.push_back(std::sqrt(min_sq_dist(q, a)));
  return out;
}

MetricReport evaluate_pair(const PointCloud& a, const PointCloud& b, double d) {
  MetricReport r;
  r.cd_l1 = chamfer_l1(a, b);
  r.cd_l2 = chamfer_l2(a, b);
  r.fscore = fscore(a, b, d);
  r.threshold_d = d;
  return r;
}

PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cloud: cannot open " + path);
  PointCloud pc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      throw std::runtime_error("load_cloud: malformed line " + std::to_string(lineno) +
                               " in " + path);
    }
    std::string rest;
    if (ls >> rest) {
      throw std::runtime_error("load_cloud: trailing data on line " + std::to_string(lineno) +
                               " in " + path);
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw std::runtime_error("load_cloud: non-finite coordinate on line " +
                               std::to_string(lineno) + " in " + path);
    }
    pc.pts.emplace_back(x, y, z);
  }
  return pc;
}

void save_cloud(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_cloud: cannot open " + path);
  char buf[96];
  for (const Vec3& p : pc.pts) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  if (!out) throw std::runtime_error("save_cloud: write failed for " + path);
}

}  // namespace egiinet
