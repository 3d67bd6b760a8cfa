#include "refdepth/scene.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace refdepth {

void Scene::validate() const {
  for (const Box& b : boxes) {
    if (!(b.hi.x > b.lo.x && b.hi.y > b.lo.y && b.hi.z > b.lo.z))
      throw std::invalid_argument("Scene: box with non-positive extent");
    if (b.lo.y < 0.0)
      throw std::invalid_argument("Scene: box bottom below ground");
  }
  for (const Wall& w : walls)
    if (w.axis != 0 && w.axis != 2)
      throw std::invalid_argument("Scene: wall axis must be 0 (x) or 2 (z)");
}

Vec3 CameraPose::right_axis() const {
  return {std::cos(yaw), 0.0, -std::sin(yaw)};
}

Vec3 CameraPose::forward_axis() const {
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  return {cp * std::sin(yaw), -sp, cp * std::cos(yaw)};
}

Vec3 CameraPose::down_axis() const {
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  // down = cos(pitch) * (0,-1,0) + sin(pitch) * level_forward
  return {sp * std::sin(yaw), -cp, sp * std::cos(yaw)};
}

Vec3 CameraPose::world_to_camera(const Vec3& p) const {
  const Vec3 d = p - position;
  return {dot(d, right_axis()), dot(d, down_axis()), dot(d, forward_axis())};
}

Vec3 CameraPose::camera_to_world_dir(const Vec3& d) const {
  const Vec3 r = right_axis(), dn = down_axis(), f = forward_axis();
  return {d.x * r.x + d.y * dn.x + d.z * f.x,
          d.x * r.y + d.y * dn.y + d.z * f.y,
          d.x * r.z + d.y * dn.z + d.z * f.z};
}

GravityFrame CameraPose::gravity_frame() const {
  GravityFrame gf;
  const Vec3 g_world{0.0, -1.0, 0.0};
  gf.g = {dot(g_world, right_axis()), dot(g_world, down_axis()), dot(g_world, forward_axis())};
  gf.camera_height = position.y;
  return gf;
}

namespace {

// Slab test; returns entry parameter of the nearest face crossing, or
// nothing when the ray misses or the box lies behind the origin.
std::optional<double> intersect_box(const Box& b, const Vec3& o, const Vec3& d) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double los[3] = {b.lo.x, b.lo.y, b.lo.z};
  const double his[3] = {b.hi.x, b.hi.y, b.hi.z};
  for (int a = 0; a < 3; ++a) {
    if (ds[a] == 0.0) {
      if (os[a] < los[a] || os[a] > his[a]) return std::nullopt;
      continue;
    }
    double t0 = (los[a] - os[a]) / ds[a];
    double t1 = (his[a] - os[a]) / ds[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) tmin = t0;
    if (t1 < tmax) tmax = t1;
  }
  if (tmax < tmin || tmax <= 0.0) return std::nullopt;
  if (tmin <= 0.0) return std::nullopt;  // origin inside: treated as miss
  return tmin;
}

Vec3 box_normal(const Box& b, const Vec3& p) {
  // Face whose plane is closest to p.
  const double d[6] = {std::abs(p.x - b.lo.x), std::abs(p.x - b.hi.x),
                       std::abs(p.y - b.lo.y), std::abs(p.y - b.hi.y),
                       std::abs(p.z - b.lo.z), std::abs(p.z - b.hi.z)};
  int best = 0;
  for (int i = 1; i < 6; ++i)
    if (d[i] < d[best]) best = i;
  switch (best) {
    case 0: return {-1.0, 0.0, 0.0};
    case 1: return {1.0, 0.0, 0.0};
    case 2: return {0.0, -1.0, 0.0};
    case 3: return {0.0, 1.0, 0.0};
    case 4: return {0.0, 0.0, -1.0};
    default: return {0.0, 0.0, 1.0};
  }
}

}  // namespace

std::optional<Hit> intersect_scene(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  std::optional<Hit> best;

  auto consider = [&](double t, const Vec3& n, float albedo) {
    if (t <= 0.0) return;
    if (!best || t < best->t) best = Hit{t, n, albedo};
  };

  // Ground plane y = 0.
  if (dir.y != 0.0) {
    const double t = -origin.y / dir.y;
    if (t > 0.0) consider(t, Vec3{0.0, 1.0, 0.0}, scene.ground_albedo);
  }

  for (const Wall& w : scene.walls) {
    const double oc = (w.axis == 0) ? origin.x : origin.z;
    const double dc = (w.axis == 0) ? dir.x : dir.z;
    if (dc == 0.0) continue;
    const double t = (w.offset - oc) / dc;
    if (t <= 0.0) continue;
    const double y = origin.y + t * dir.y;
    if (y < 0.0 || y > w.top) continue;
    Vec3 n = (w.axis == 0) ? Vec3{dc > 0.0 ? -1.0 : 1.0, 0.0, 0.0}
                           : Vec3{0.0, 0.0, dc > 0.0 ? -1.0 : 1.0};
    consider(t, n, w.albedo);
  }

  for (const Box& b : scene.boxes) {
    if (auto t = intersect_box(b, origin, dir)) {
      const Vec3 p = origin + dir * *t;
      consider(*t, box_normal(b, p), b.albedo);
    }
  }

  return best;
}

DepthMap raycast_depth(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& k) {
  DepthMap out(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    const double v = y + 0.5;
    for (int x = 0; x < k.width; ++x) {
      const double u = x + 0.5;
      // z-normalized direction: the ray parameter is the perspective depth.
      const Vec3 dir_cam{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const Vec3 dir = pose.camera_to_world_dir(dir_cam);
      const auto hit = intersect_scene(scene, pose.position, dir);
      if (hit && hit->t <= scene.max_range)
        out.set(x, y, static_cast<float>(hit->t));
    }
  }
  return out;
}

GrayImage shade_image(const Scene& scene, const CameraPose& pose, const CameraIntrinsics& k) {
  GrayImage out(k.width, k.height, 0.0f);
  const Vec3 light = normalized(Vec3{0.3, 0.9, -0.35});  // fixed overhead light, world frame
  for (int y = 0; y < k.height; ++y) {
    const double v = y + 0.5;
    for (int x = 0; x < k.width; ++x) {
      const double u = x + 0.5;
      const Vec3 dir_cam{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
      const Vec3 dir = pose.camera_to_world_dir(dir_cam);
      const auto hit = intersect_scene(scene, pose.position, dir);
      if (!hit || hit->t > scene.max_range) continue;
      const double diffuse = std::max(0.0, dot(hit->normal, light));
      const double value = hit->albedo * (0.25 + 0.75 * diffuse);
      out.at(x, y) = static_cast<float>(std::min(1.0, value));
    }
  }
  return out;
}

LaserScan simulate_laser(const Scene& scene, const CameraPose& pose, double mount_height,
                         double fov, int n_rays, double noise_sigma, double dropout_p,
                         uint64_t rng_seed) {
  if (mount_height <= 0.0)
    throw std::invalid_argument("simulate_laser: mount_height must be positive");
  if (n_rays < 2)
    throw std::invalid_argument("simulate_laser: n_rays must be >= 2");

  LaserScan scan;
  scan.mount_height = mount_height;
  scan.bearings.resize(n_rays);
  scan.ranges.assign(n_rays, 0.0f);
  scan.valid.assign(n_rays, 0);

  const Vec3 origin{pose.position.x, mount_height, pose.position.z};
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < n_rays; ++i) {
    const double bearing = -fov / 2.0 + (i + 0.5) * fov / n_rays;
    scan.bearings[i] = bearing;

    // Horizontal ray at the mount height, azimuth relative to camera yaw.
    const double az = pose.yaw + bearing;
    const Vec3 dir{std::sin(az), 0.0, std::cos(az)};

    // Draw per-ray randomness unconditionally so the stream stays aligned
    // across scenes with different hit patterns.
    const double eps = (noise_sigma > 0.0) ? noise(rng) : 0.0;
    const double drop = unit(rng);

    const auto hit = intersect_scene(scene, origin, dir);
    if (!hit || hit->t > scene.max_range) continue;
    if (drop < dropout_p) continue;

    const double range = hit->t + eps;
    if (range <= 0.0) continue;
    scan.ranges[i] = static_cast<float>(range);
    scan.valid[i] = 1;
  }
  return scan;
}

}  // namespace refdepth
