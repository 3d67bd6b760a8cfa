#include "refdepth/geometry.hpp"

namespace refdepth {

Ray pixel_to_ray(double u, double v, const CameraIntrinsics& k) {
  if (u < 0.0 || u >= k.width || v < 0.0 || v >= k.height)
    throw std::domain_error("pixel_to_ray: pixel outside image bounds");
  const Vec3 dir{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
  return Ray{Vec3{0.0, 0.0, 0.0}, normalized(dir)};
}

PixelDepth project(const Vec3& p, const CameraIntrinsics& k) {
  if (p.z <= 0.0)
    throw std::domain_error("project: point behind camera (z <= 0)");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z};
}

double pixel_height(double u, double v, double depth, const CameraIntrinsics& k,
                    const GravityFrame& gf) {
  if (depth <= 0.0)
    throw std::domain_error("pixel_height: depth must be positive");
  const Vec3 p = back_project(u, v, depth, k);
  return gf.camera_height - dot(p, gf.g);
}

}  // namespace refdepth
