#include "refdepth/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "refdepth/error.hpp"
#include "refdepth/io.hpp"

namespace refdepth {

namespace {

ObstacleMap make_bins(double fov, int n_bearings, double max_height) {
  if (n_bearings < 1) throw std::invalid_argument("obstacle_map: n_bearings must be >= 1");
  if (!(max_height > 0.0)) throw std::invalid_argument("obstacle_map: max_height must be > 0");
  ObstacleMap map;
  map.max_height = max_height;
  map.bearings.resize(n_bearings);
  map.nearest.assign(n_bearings, 0.0);
  map.has_point.assign(n_bearings, 0);
  const double lo = -fov / 2.0, width = fov / n_bearings;
  for (int i = 0; i < n_bearings; ++i) map.bearings[i] = lo + (i + 0.5) * width;
  return map;
}

void insert_point(ObstacleMap& map, double fov, double azimuth, double dist) {
  const double lo = -fov / 2.0, width = fov / static_cast<int>(map.bearings.size());
  int bin = static_cast<int>(std::floor((azimuth - lo) / width));
  bin = std::clamp(bin, 0, static_cast<int>(map.bearings.size()) - 1);
  if (!map.has_point[bin] || dist < map.nearest[bin]) {
    map.nearest[bin] = dist;
    map.has_point[bin] = 1;
  }
}

}  // namespace

// Ground clearance: f32 depth rounding leaves ground pixels a few
// micrometers off height zero, so the open lower bound of (0, M] is
// evaluated 1 mm above the ground plane.
constexpr double kGroundEps = 1e-3;

ObstacleMap obstacle_map(const DepthMap& depth, const CameraIntrinsics& k,
                         const GravityFrame& gf, double max_height, int n_bearings) {
  gf.validate();
  const double fov = k.hfov();
  ObstacleMap map = make_bins(fov, n_bearings, max_height);

  // Horizontal basis as in the reference-map renderer: azimuth 0 along the
  // ground-projected optical axis, positive toward camera x.
  const Vec3 x_axis{1.0, 0.0, 0.0};
  Vec3 e1 = x_axis - gf.g * dot(x_axis, gf.g);
  const double e1n = norm(e1);
  if (e1n < 1e-9) throw ConfigError("obstacle_map: camera x axis parallel to gravity");
  e1 = e1 * (1.0 / e1n);
  const Vec3 e2{e1.y * gf.g.z - e1.z * gf.g.y, e1.z * gf.g.x - e1.x * gf.g.z,
                e1.x * gf.g.y - e1.y * gf.g.x};

  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double d = depth.at(x, y);
      const Vec3 p = back_project(x + 0.5, y + 0.5, d, k);
      const double height = gf.camera_height - dot(p, gf.g);
      if (!(height > kGroundEps && height <= max_height)) continue;
      const Vec3 ph = p - gf.g * dot(p, gf.g);
      const double dist = std::sqrt(dot(ph, ph));
      const double azimuth = std::atan2(dot(ph, e1), dot(ph, e2));
      insert_point(map, fov, azimuth, dist);
    }
  return map;
}

ObstacleMap obstacle_map_from_scan(const LaserScan& scan, double max_height, int n_bearings,
                                   double fov) {
  ObstacleMap map = make_bins(fov, n_bearings, max_height);
  if (!(scan.mount_height > 0.0 && scan.mount_height <= max_height)) return map;
  for (size_t i = 0; i < scan.size(); ++i) {
    if (!scan.valid[i]) continue;
    insert_point(map, fov, scan.bearings[i], scan.ranges[i]);
  }
  return map;
}

ObstacleComparison compare_obstacle_sources(const Scene& scene, const CameraPose& pose,
                                            const CameraIntrinsics& k,
                                            const std::vector<double>& heights,
                                            const DepthPredictor* predictor, double max_height,
                                            int n_bearings, double miss_margin,
                                            double model_scan_height) {
  ObstacleComparison cmp;
  const double fov = k.hfov();
  const GravityFrame gf = pose.gravity_frame();

  for (double h : heights) {
    const LaserScan scan = simulate_laser(scene, pose, h, fov, k.width, 0.0, 0.0, 0);
    char name[32];
    std::snprintf(name, sizeof(name), "laser_%dcm", static_cast<int>(std::lround(h * 100.0)));
    cmp.sources.push_back({name, obstacle_map_from_scan(scan, max_height, n_bearings, fov)});
  }

  const DepthMap gt = raycast_depth(scene, pose, k);
  if (predictor) {
    const GrayImage image = shade_image(scene, pose, k);
    const LaserScan scan =
        simulate_laser(scene, pose, model_scan_height, fov, k.width, 0.0, 0.0, 0);
    const ReferenceDepthMap ref = build_reference(scan, gf, k);
    const DepthMap pred = (*predictor)(image, ref);
    cmp.sources.push_back({"predicted", obstacle_map(pred, k, gf, max_height, n_bearings)});
  }
  cmp.sources.push_back({"ground_truth", obstacle_map(gt, k, gf, max_height, n_bearings)});

  const ObstacleMap& truth = cmp.sources.back().map;
  for (const auto& src : cmp.sources) {
    if (src.name == "ground_truth") continue;
    if (src.name.rfind("laser_", 0) != 0) continue;
    std::vector<int> missed;
    for (size_t i = 0; i < truth.has_point.size(); ++i) {
      if (!truth.has_point[i]) continue;
      if (!src.map.has_point[i] || src.map.nearest[i] > truth.nearest[i] + miss_margin)
        missed.push_back(static_cast<int>(i));
    }
    cmp.missed_bins[src.name] = std::move(missed);
  }
  return cmp;
}

void write_obstacle_csv(const std::string& path, const ObstacleComparison& cmp) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "bearing_rad,nearest_m,source\n";
  for (const auto& src : cmp.sources)
    for (size_t i = 0; i < src.map.bearings.size(); ++i) {
      if (!src.map.has_point[i]) continue;
      f << format_double(src.map.bearings[i]) << "," << format_double(src.map.nearest[i]) << ","
        << src.name << "\n";
    }
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace refdepth
