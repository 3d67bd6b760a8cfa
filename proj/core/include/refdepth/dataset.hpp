#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refdepth/config.hpp"
#include "refdepth/io.hpp"
#include "refdepth/scene.hpp"

namespace refdepth {

struct DatasetConfig {
  int n_scenes = 10;
  double split_ratio = 0.8;
  CameraIntrinsics intrinsics;
  double camera_height = 1.0;
  double laser_height = 0.8;
  int laser_rays = 0;      // 0: one per image column
  double laser_fov = 0.0;  // 0: camera horizontal FOV
  double laser_noise_sigma = 0.01;
  double laser_dropout = 0.05;
  double max_range = 20.0;
  double room_min = 4.0, room_max = 8.0;
  double wall_height = 2.5;
  int box_count_min = 2, box_count_max = 6;
  double box_size_min = 0.2, box_size_max = 1.5;
  uint64_t seed = 1;

  static DatasetConfig from_run_config(const RunConfig& cfg);
  int effective_laser_rays() const { return laser_rays > 0 ? laser_rays : intrinsics.width; }
  double effective_laser_fov() const { return laser_fov > 0.0 ? laser_fov : intrinsics.hfov(); }
};

/// One generated sample: the analytic scene plus everything derived from it.
struct SceneSample {
  Scene scene;
  CameraPose pose;
  GrayImage image;
  DepthMap gt_depth;
  LaserScan scan;
  CameraMeta meta;
};

/// Deterministic per-index sample; the index is folded into the dataset seed
/// so samples are independent of generation order (and safe to generate
/// concurrently).
SceneSample make_sample(const DatasetConfig& cfg, int scene_index);

/// Scenes to disk: out_dir/{train,test}/sample_NNNN.{image.pgm, depth.pfm,
/// scan.csv, camera.txt, scene.json} plus a manifest.csv listing every file.
/// The split is disjoint by scene. Byte-identical for identical (cfg, seed).
void generate_dataset(const DatasetConfig& cfg, const std::string& out_dir, int threads = 1);

// Scene (and camera pose) serialization for the obstacle-comparison tool.
void save_scene_json(const std::string& path, const Scene& scene, const CameraPose& pose);
void load_scene_json(const std::string& path, Scene& scene, CameraPose& pose);

/// One dataset sample as read back from disk.
struct LoadedSample {
  GrayImage image;
  DepthMap gt;
  LaserScan scan;
  CameraMeta meta;
  std::string prefix;  // path prefix for optional extras (scene.json)
};

std::vector<LoadedSample> load_split(const std::string& dataset_dir, const std::string& split);

}  // namespace refdepth
