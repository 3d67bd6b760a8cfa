#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "refdepth/depth_map.hpp"
#include "refdepth/geometry.hpp"
#include "refdepth/laser_scan.hpp"
#include "refdepth/refmap.hpp"
#include "refdepth/scene.hpp"

namespace refdepth {

/// Per-bearing nearest planar distance to any 3D point whose height above
/// ground lies in (0, M]: the down-projected avoidance view of a depth map.
struct ObstacleMap {
  std::vector<double> bearings;   // bin centers, camera azimuth
  std::vector<double> nearest;    // meters; meaningful where has_point
  std::vector<uint8_t> has_point;
  double max_height = 1.0;
};

/// Back-projects every valid pixel, keeps points with height in (0, M], and
/// takes the per-bearing-bin minimum of the planar (gravity-orthogonal)
/// distance. Bins span the camera's horizontal FOV.
ObstacleMap obstacle_map(const DepthMap& depth, const CameraIntrinsics& k,
                         const GravityFrame& gf, double max_height, int n_bearings);

/// Obstacle map of a single planar scan: each valid return is one point at
/// its bearing with planar distance equal to the range. Empty when the
/// mount height lies outside (0, M].
ObstacleMap obstacle_map_from_scan(const LaserScan& scan, double max_height, int n_bearings,
                                   double fov);

using DepthPredictor =
    std::function<DepthMap(const GrayImage&, const ReferenceDepthMap&)>;

struct ObstacleComparison {
  struct Source {
    std::string name;
    ObstacleMap map;
  };
  std::vector<Source> sources;
  /// Bins where a laser source reports nothing (or something much farther)
  /// while the dense ground-truth map sees an obstacle.
  std::map<std::string, std::vector<int>> missed_bins;
};

/// Builds obstacle maps from (a) simulated noiseless laser scans at each
/// given mount height, (b) optionally a model's predicted dense depth, and
/// (c) the ground-truth ray-cast depth, then flags laser bins that miss
/// obstacles the dense maps detect. The predictor, when given, must return a
/// full-resolution depth map.
ObstacleComparison compare_obstacle_sources(const Scene& scene, const CameraPose& pose,
                                            const CameraIntrinsics& k,
                                            const std::vector<double>& heights,
                                            const DepthPredictor* predictor, double max_height,
                                            int n_bearings, double miss_margin = 0.3,
                                            double model_scan_height = 0.8);

/// CSV rows `bearing_rad,nearest_m,source`; bins without points are skipped.
void write_obstacle_csv(const std::string& path, const ObstacleComparison& cmp);

}  // namespace refdepth
