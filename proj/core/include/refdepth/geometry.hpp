#pragma once

#include <cmath>
#include <stdexcept>

namespace refdepth {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

/// Pinhole camera. Pixel coordinates are continuous: u = cx lies on the
/// optical axis, raster pixel (i, j) is sampled at its center (i+0.5, j+0.5).
struct CameraIntrinsics {
  double fx = 60.0, fy = 60.0;
  double cx = 32.0, cy = 24.0;
  int width = 64, height = 48;

  void validate() const {
    if (fx <= 0.0 || fy <= 0.0)
      throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
      throw std::invalid_argument("CameraIntrinsics: principal point outside image");
  }

  /// Horizontal field of view in radians.
  double hfov() const { return 2.0 * std::atan((width / 2.0) / fx); }
};

/// Gravity expressed in camera coordinates (x right, y down, z forward)
/// plus the camera's height above the ground plane. For a level camera
/// g = (0, 1, 0): the image y axis points along gravity.
struct GravityFrame {
  Vec3 g{0.0, 1.0, 0.0};
  double camera_height = 1.0;

  void validate() const {
    if (std::abs(norm(g) - 1.0) > 1e-9)
      throw std::invalid_argument("GravityFrame: g must be a unit vector");
    if (camera_height <= 0.0)
      throw std::invalid_argument("GravityFrame: camera_height must be positive");
  }

  bool is_level() const {
    return std::abs(g.x) < 1e-12 && std::abs(g.y - 1.0) < 1e-12 &&
           std::abs(g.z) < 1e-12;
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

/// Back-projects a pixel to the unit ray through it. Throws std::domain_error
/// for out-of-bounds pixels.
Ray pixel_to_ray(double u, double v, const CameraIntrinsics& k);

struct PixelDepth {
  double u, v, z;
};

/// Projects a camera-frame point to the image plane. p.z must be positive.
PixelDepth project(const Vec3& p, const CameraIntrinsics& k);

/// Back-projects pixel (u, v) at perspective depth z (camera-frame z, meters).
inline Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& k) {
  return {depth * ((u - k.cx) / k.fx), depth * ((v - k.cy) / k.fy), depth};
}

/// Height above the ground plane of the 3D point seen at (u, v) with the
/// given perspective depth: camera_height - <p, g>.
double pixel_height(double u, double v, double depth, const CameraIntrinsics& k,
                    const GravityFrame& gf);

}  // namespace refdepth
