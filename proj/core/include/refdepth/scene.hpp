#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "refdepth/depth_map.hpp"
#include "refdepth/geometry.hpp"
#include "refdepth/laser_scan.hpp"

namespace refdepth {

// World frame: x/z horizontal, y up, ground plane at y = 0.

/// Axis-aligned box, world frame. Bottom faces sit at lo.y >= 0.
struct Box {
  Vec3 lo, hi;
  float albedo = 0.8f;
};

/// Vertical wall: an axis-aligned plane (axis 0 -> x = offset, axis 2 ->
/// z = offset) spanning heights [0, top]. Rays hitting above `top` miss.
struct Wall {
  int axis = 2;
  double offset = 0.0;
  double top = 2.5;
  float albedo = 0.8f;
};

struct Scene {
  std::vector<Box> boxes;
  std::vector<Wall> walls;
  float ground_albedo = 0.6f;
  double max_range = 20.0;

  void validate() const;
};

/// Camera placement: position in world coordinates (position.y is the height
/// above ground), yaw about the world up axis (0 = facing +z) and pitch
/// (positive = tilted down). Camera frame is x right, y down, z forward.
struct CameraPose {
  Vec3 position{0.0, 1.0, 0.0};
  double yaw = 0.0;
  double pitch = 0.0;

  Vec3 right_axis() const;    // camera x in world coords
  Vec3 down_axis() const;     // camera y in world coords
  Vec3 forward_axis() const;  // camera z in world coords

  Vec3 world_to_camera(const Vec3& p) const;
  Vec3 camera_to_world_dir(const Vec3& d) const;

  /// Gravity direction expressed in camera coordinates.
  GravityFrame gravity_frame() const;
};

struct Hit {
  double t = 0.0;      // ray parameter (meters for unit directions)
  Vec3 normal;         // world frame, unit
  float albedo = 0.0f;
};

/// Nearest positive ray-primitive intersection, testing ground, walls and
/// boxes. `dir` need not be unit length; t is in units of |dir|.
std::optional<Hit> intersect_scene(const Scene& scene, const Vec3& origin, const Vec3& dir);

/// Casts one ray per pixel and stores the perspective depth (camera-frame z)
/// of the nearest hit. Pixels with no hit, or hits beyond max_range, are
/// invalid.
DepthMap raycast_depth(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& k);

/// Lambertian shading from the scene's analytic normals and albedos under a
/// fixed directional light. Deterministic; misses render as 0.
GrayImage shade_image(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& k);

/// Simulates a planar laser scan at mount_height above ground, sharing the
/// camera's horizontal position and yaw. n_rays bearings are spread uniformly
/// over fov; valid returns get zero-mean Gaussian range noise (noise_sigma)
/// and each ray is dropped independently with probability dropout_p.
LaserScan simulate_laser(const Scene& scene, const CameraPose& pose, double mount_height,
                         double fov, int n_rays, double noise_sigma, double dropout_p,
                         uint64_t rng_seed);

}  // namespace refdepth
