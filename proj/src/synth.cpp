// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "egiinet/rng.hpp"

namespace egiinet {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 view_direction(double azimuth, double elevation) {
  const double ce = std::cos(elevation);
  return Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation));
}

Vec3 gaussian_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

PointCloud sphere_points(int n, double radius, const Vec3& center, std::mt19937_64& rng) {
  PointCloud pc;
  pc.pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pc.pts.push_back(center + radius * gaussian_direction(rng));
  return pc;
}

// Uniform surface sampling of an axis-aligned box with half extents h,
// faces weighted by area.
PointCloud box_points(int n, const Vec3& h, const Vec3& center, std::mt19937_64& rng) {
  const double area_x = h.y() * h.z();  // per face pair, up to a shared factor
  const double area_y = h.x() * h.z();
  const double area_z = h.x() * h.y();
  std::discrete_distribution<int> face({area_x, area_x, area_y, area_y, area_z, area_z});
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  PointCloud pc;
  pc.pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int f = face(rng);
    const double a = u(rng);
    const double b = u(rng);
    Vec3 p;
    switch (f) {
      case 0: p = Vec3(+h.x(), a * h.y(), b * h.z()); break;
      case 1: p = Vec3(-h.x(), a * h.y(), b * h.z()); break;
      case 2: p = Vec3(a * h.x(), +h.y(), b * h.z()); break;
      case 3: p = Vec3(a * h.x(), -h.y(), b * h.z()); break;
      case 4: p = Vec3(a * h.x(), b * h.y(), +h.z()); break;
      default: p = Vec3(a * h.x(), b * h.y(), -h.z()); break;
    }
    pc.pts.push_back(center + p);
  }
  return pc;
}

PointCloud cylinder_points(int n, double radius, double half_height, std::mt19937_64& rng) {
  const double lateral = 2.0 * kPi * radius * 2.0 * half_height;
  const double cap = kPi * radius * radius;
  std::discrete_distribution<int> part({lateral, cap, cap});
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  PointCloud pc;
  pc.pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int which = part(rng);
    const double theta = 2.0 * kPi * u01(rng);
    if (which == 0) {
      const double z = (2.0 * u01(rng) - 1.0) * half_height;
      pc.pts.emplace_back(radius * std::cos(theta), radius * std::sin(theta), z);
    } else {
      const double r = radius * std::sqrt(u01(rng));
      const double z = which == 1 ? half_height : -half_height;
      pc.pts.emplace_back(r * std::cos(theta), r * std::sin(theta), z);
    }
  }
  return pc;
}

PointCloud torus_points(int n, double major, double minor, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PointCloud pc;
  pc.pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double theta = 2.0 * kPi * u01(rng);
    // area-weighted tube angle via rejection
    double phi;
    do {
      phi = 2.0 * kPi * u01(rng);
    } while (u01(rng) > (major + minor * std::cos(phi)) / (major + minor));
    const double ring = major + minor * std::cos(phi);
    pc.pts.emplace_back(ring * std::cos(theta), ring * std::sin(theta), minor * std::sin(phi));
  }
  return pc;
}

}  // namespace

ShapeFamily family_from_string(const std::string& s) {
  if (s == "sphere") return ShapeFamily::sphere;
  if (s == "box") return ShapeFamily::box;
  if (s == "cylinder") return ShapeFamily::cylinder;
  if (s == "torus") return ShapeFamily::torus;
  if (s == "composite") return ShapeFamily::composite;
  throw std::invalid_argument("unknown shape family: " + s);
}

std::string to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::sphere: return "sphere";
    case ShapeFamily::box: return "box";
    case ShapeFamily::cylinder: return "cylinder";
    case ShapeFamily::torus: return "torus";
    case ShapeFamily::composite: return "composite";
  }
  return "sphere";
}

const std::vector<ShapeFamily>& all_families() {
  static const std::vector<ShapeFamily> families = {
      ShapeFamily::sphere, ShapeFamily::box, ShapeFamily::cylinder, ShapeFamily::torus,
      ShapeFamily::composite};
  return families;
}

PointCloud sample_shape(ShapeFamily family, int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_shape: n must be >= 1");
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  switch (family) {
    case ShapeFamily::sphere:
      return sphere_points(n, 0.5, Vec3::Zero(), rng);
    case ShapeFamily::box: {
      const Vec3 h(0.5, 0.25 + 0.25 * u01(rng), 0.25 + 0.25 * u01(rng));
      return box_points(n, h, Vec3::Zero(), rng);
    }
    case ShapeFamily::cylinder: {
      const double radius = 0.2 + 0.25 * u01(rng);
      return cylinder_points(n, radius, 0.5, rng);
    }
    case ShapeFamily::torus: {
      const double minor = 0.1 + 0.1 * u01(rng);
      return torus_points(n, 0.5 - minor, minor, rng);
    }
    case ShapeFamily::composite: {
      // an off-center sphere and an off-center box, both inside the cube
      const double rs = 0.15 + 0.1 * u01(rng);
      Vec3 cs;
      for (int k = 0; k < 3; ++k) cs[k] = (2.0 * u01(rng) - 1.0) * (0.5 - rs);
      Vec3 hb;
      for (int k = 0; k < 3; ++k) hb[k] = 0.1 + 0.1 * u01(rng);
      Vec3 cb;
      for (int k = 0; k < 3; ++k) cb[k] = (2.0 * u01(rng) - 1.0) * (0.5 - hb[k]);

      const int n_sphere = n / 2;
      PointCloud pc = sphere_points(n_sphere, rs, cs, rng);
      PointCloud box = box_points(n - n_sphere, hb, cb, rng);
      pc.pts.insert(pc.pts.end(), box.pts.begin(), box.pts.end());
      return pc;
    }
  }
  throw std::invalid_argument("sample_shape: unknown family");
}

std::vector<char> occlusion_mask(const PointCloud& pc, double azimuth, double elevation) {
  if (pc.empty()) throw std::invalid_argument("occlusion_mask: empty cloud");
  const Vec3 v = view_direction(azimuth, elevation);
  std::vector<char> keep(pc.pts.size());
  for (size_t i = 0; i < pc.pts.size(); ++i) {
    keep[i] = pc.pts[i].dot(v) > 0.0 ? 1 : 0;
  }
  return keep;
}

PointCloud occlude_view(const PointCloud& pc, double azimuth, double elevation) {
  const auto keep = occlusion_mask(pc, azimuth, elevation);
  PointCloud out;
  for (size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.pts.push_back(pc.pts[i]);
  }
  return out;
}

ImageView render_view(const PointCloud& pc, double azimuth, double elevation, int h, int w) {
  if (pc.empty()) throw std::invalid_argument("render_view: empty cloud");
  if (h < 1 || w < 1) throw std::invalid_argument("render_view: bad image size");

  const Vec3 fwd = view_direction(azimuth, elevation);
  Vec3 right = Vec3(0, 0, 1).cross(fwd);
  if (right.norm() < 1e-9) right = Vec3(0, 1, 0);  // looking straight down an axis pole
  right.normalize();
  const Vec3 up = fwd.cross(right).normalized();

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::Vector3d> projected;  // (sx, sy, depth)
  projected.reserve(pc.pts.size());
  for (const Vec3& p : pc.pts) {
    const double depth = p.dot(fwd);
    projected.emplace_back(p.dot(right), p.dot(up), depth);
    dmin = std::min(dmin, depth);
    dmax = std::max(dmax, depth);
  }
  const double drange = dmax - dmin;

  // orthographic window wide enough for any unit-cube shape
  const double half_window = 0.9;

  ImageView img = ImageView::zeros(h, w);
  for (const auto& q : projected) {
    const int px = static_cast<int>(std::floor((q.x() / (2.0 * half_window) + 0.5) * w));
    const int py = static_cast<int>(std::floor((0.5 - q.y() / (2.0 * half_window)) * h));
    const double shade =
        drange < 1e-12 ? 1.0 : 0.25 + 0.75 * (q.z() - dmin) / drange;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = px + dx;
        const int y = py + dy;
        if (x < 0 || x >= w || y < 0 || y >= h) continue;
        for (int ch = 0; ch < 3; ++ch) {
          if (shade > img.at(y, x, ch)) img.at(y, x, ch) = shade;
        }
      }
    }
  }
  return img;
}

BuiltSample make_sample(const DatasetConfig& cfg, ShapeFamily family, uint64_t sample_seed) {
  BuiltSample s;
  s.family = family;
  s.seed = sample_seed;
  s.complete = sample_shape(family, cfg.n_complete, derive_seed(sample_seed, "shape"));

  // occlusion viewpoint with an acceptable retention fraction
  std::mt19937_64 occ_rng(derive_seed(sample_seed, "occlude"));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<char> keep;
  int kept = 0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    s.occl_azimuth = 2.0 * kPi * u01(occ_rng);
    s.occl_elevation = (2.0 * u01(occ_rng) - 1.0) * (kPi / 3.0);
    keep = occlusion_mask(s.complete, s.occl_azimuth, s.occl_elevation);
    kept = static_cast<int>(std::count(keep.begin(), keep.end(), 1));
    const double frac = static_cast<double>(kept) / cfg.n_complete;
    if (frac >= 0.25 && frac <= 0.75) break;
  }
  if (kept == 0) throw std::runtime_error("make_sample: occlusion removed every point");

  std::vector<int> kept_idx;
  kept_idx.reserve(static_cast<size_t>(kept));
  for (size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) kept_idx.push_back(static_cast<int>(i));
  }

  // resample the retained subset to the fixed partial size
  std::mt19937_64 part_rng(derive_seed(sample_seed, "partial"));
  s.partial.pts.reserve(static_cast<size_t>(cfg.partial_size));
  if (kept >= cfg.partial_size) {
    std::vector<int> order = kept_idx;
    std::shuffle(order.begin(), order.end(), part_rng);
    for (int i = 0; i < cfg.partial_size; ++i) s.partial.pts.push_back(s.complete[order[i]]);
  } else {
    for (int i : kept_idx) s.partial.pts.push_back(s.complete[i]);
    std::uniform_int_distribution<int> pick(0, kept - 1);
    while (static_cast<int>(s.partial.pts.size()) < cfg.partial_size) {
      s.partial.pts.push_back(s.complete[kept_idx[static_cast<size_t>(pick(part_rng))]]);
    }
  }

  // guidance view from a viewpoint rotated at least 30 degrees in azimuth
  std::mt19937_64 view_rng(derive_seed(sample_seed, "view"));
  const double sign = u01(view_rng) < 0.5 ? -1.0 : 1.0;
  const double delta = kPi / 6.0 + (5.0 * kPi / 6.0 - kPi / 6.0) * u01(view_rng);
  s.view_azimuth = std::fmod(s.occl_azimuth + sign * delta + 2.0 * kPi, 2.0 * kPi);
  s.view_elevation = (2.0 * u01(view_rng) - 1.0) * (kPi / 4.0);
  s.view = render_view(s.complete, s.view_azimuth, s.view_elevation, cfg.image_h, cfg.image_w);
  return s;
}

std::string manifest_path(const std::string& out_dir) { return out_dir + "/manifest.txt"; }

std::vector<SampleRecord> build_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("build_dataset: cannot create " + out_dir);
  if (cfg.n_samples > 0) {
    fs::create_directories(out_dir + "/clouds", ec);
    fs::create_directories(out_dir + "/views", ec);
    if (ec) throw std::runtime_error("build_dataset: cannot create sample dirs in " + out_dir);
  }

  const std::vector<ShapeFamily>& cycle = cfg.families.empty() ? all_families() : cfg.families;
  std::vector<SampleRecord> records;
  records.reserve(static_cast<size_t>(cfg.n_samples));
  char name[64];
  for (int i = 0; i < cfg.n_samples; ++i) {
    const ShapeFamily family = cycle[static_cast<size_t>(i) % cycle.size()];
    const uint64_t sample_seed = derive_seed(cfg.seed, static_cast<uint64_t>(i));
    const BuiltSample s = make_sample(cfg, family, sample_seed);

    SampleRecord r;
    r.id = i;
    std::snprintf(name, sizeof(name), "clouds/sample_%04d_complete.txt", i);
    r.complete_path = name;
    std::snprintf(name, sizeof(name), "clouds/sample_%04d_partial.txt", i);
    r.partial_path = name;
    std::snprintf(name, sizeof(name), "views/sample_%04d.png", i);
    r.view_path = name;
    r.view_azimuth = s.view_azimuth;
    r.view_elevation = s.view_elevation;
    r.family = family;
    r.seed = sample_seed;

    save_cloud(s.complete, out_dir + "/" + r.complete_path);
    save_cloud(s.partial, out_dir + "/" + r.partial_path);
    save_png(s.view, out_dir + "/" + r.view_path);
    records.push_back(std::move(r));
  }

  std::ofstream mf(manifest_path(out_dir));
  if (!mf) throw std::runtime_error("build_dataset: cannot write manifest in " + out_dir);
  mf << "# id complete partial view azimuth elevation family seed\n";
  char line[512];
  for (const SampleRecord& r : records) {
    std::snprintf(line, sizeof(line), "%d %s %s %s %.17g %.17g %s %llu\n", r.id,
                  r.complete_path.c_str(), r.partial_path.c_str(), r.view_path.c_str(),
                  r.view_azimuth, r.view_elevation, to_string(r.family).c_str(),
                  static_cast<unsigned long long>(r.seed));
    mf << line;
  }
  if (!mf) throw std::runtime_error("build_dataset: manifest write failed in " + out_dir);
  return records;
}

std::vector<SampleRecord> load_manifest(const std::string& manifest_path_in) {
  std::ifstream in(manifest_path_in);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + manifest_path_in);
  std::vector<SampleRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    SampleRecord r;
    std::string family;
    unsigned long long seed = 0;
    if (!(ls >> r.id >> r.complete_path >> r.partial_path >> r.view_path >> r.view_azimuth >>
          r.view_elevation >> family >> seed)) {
      throw std::runtime_error("load_manifest: malformed line " + std::to_string(lineno) + " in " +
                               manifest_path_in);
    }
    r.family = family_from_string(family);
    r.seed = seed;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace egiinet
