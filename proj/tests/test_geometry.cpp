#include "refdepth/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace refdepth;

namespace {

CameraIntrinsics test_camera() {
  CameraIntrinsics k;
  k.fx = k.fy = 100.0;
  k.cx = k.cy = 50.0;
  k.width = k.height = 200;
  return k;
}

}  // namespace

TEST(Geometry, PrincipalPointRayIsOpticalAxis) {
  const CameraIntrinsics k = test_camera();
  const Ray r = pixel_to_ray(k.cx, k.cy, k);
  EXPECT_DOUBLE_EQ(r.direction.x, 0.0);
  EXPECT_DOUBLE_EQ(r.direction.y, 0.0);
  EXPECT_DOUBLE_EQ(r.direction.z, 1.0);
}

TEST(Geometry, UnitTangentOffset) {
  const CameraIntrinsics k = test_camera();
  const Ray r = pixel_to_ray(k.cx + k.fx, k.cy, k);
  // direction proportional to (1, 0, 1)
  EXPECT_NEAR(r.direction.x / r.direction.z, 1.0, 1e-12);
  EXPECT_NEAR(r.direction.y, 0.0, 1e-12);
}

TEST(Geometry, CornerPixelHandArithmetic) {
  const CameraIntrinsics k = test_camera();
  const Ray r = pixel_to_ray(0.0, 0.0, k);
  // (0 - 50) / 100 = -0.5 in both axes
  EXPECT_NEAR(r.direction.x / r.direction.z, -0.5, 1e-12);
  EXPECT_NEAR(r.direction.y / r.direction.z, -0.5, 1e-12);
  EXPECT_NEAR(norm(r.direction), 1.0, 1e-12);
}

TEST(Geometry, OutOfBoundsPixelThrows) {
  const CameraIntrinsics k = test_camera();
  EXPECT_THROW(pixel_to_ray(-1.0, 10.0, k), std::domain_error);
  EXPECT_THROW(pixel_to_ray(10.0, 200.0, k), std::domain_error);
}

TEST(Geometry, ProjectOpticalAxis) {
  const CameraIntrinsics k = test_camera();
  const PixelDepth p = project({0.0, 0.0, 2.0}, k);
  EXPECT_DOUBLE_EQ(p.u, k.cx);
  EXPECT_DOUBLE_EQ(p.v, k.cy);
  EXPECT_DOUBLE_EQ(p.z, 2.0);
}

TEST(Geometry, ProjectHandArithmetic) {
  const CameraIntrinsics k = test_camera();
  const PixelDepth p = project({1.0, 0.0, 2.0}, k);
  EXPECT_DOUBLE_EQ(p.u, 100.0);  // 100 * 1/2 + 50
}

TEST(Geometry, ProjectBehindCameraThrows) {
  const CameraIntrinsics k = test_camera();
  EXPECT_THROW(project({0.0, 0.0, 0.0}, k), std::domain_error);
  EXPECT_THROW(project({0.0, 0.0, -1.0}, k), std::domain_error);
}

TEST(Geometry, ProjectRayRoundTrip) {
  const CameraIntrinsics k = test_camera();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pu(0.0, k.width - 1e-9);
  std::uniform_real_distribution<double> pv(0.0, k.height - 1e-9);
  std::uniform_real_distribution<double> pz(0.1, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double u = pu(rng), v = pv(rng), z = pz(rng);
    const Ray r = pixel_to_ray(u, v, k);
    const Vec3 p = r.direction * (z / r.direction.z);
    const PixelDepth q = project(p, k);
    EXPECT_NEAR(q.u, u, 1e-6);
    EXPECT_NEAR(q.v, v, 1e-6);
    EXPECT_NEAR(q.z, z, 1e-6);
  }
}

TEST(Geometry, PixelHeightAtPrincipalPoint) {
  const CameraIntrinsics k = test_camera();
  GravityFrame gf;
  gf.camera_height = 1.0;
  for (double depth : {0.5, 1.0, 7.0})
    EXPECT_NEAR(pixel_height(k.cx, k.cy, depth, k, gf), 1.0, 1e-12);
}

TEST(Geometry, PixelHeightOnGroundPlane) {
  const CameraIntrinsics k = test_camera();
  GravityFrame gf;
  gf.camera_height = 1.3;
  // Point on the ground plane: y in camera frame equals camera height.
  const double depth = 4.0;
  const double v = k.cy + k.fy * (gf.camera_height / depth);
  EXPECT_NEAR(pixel_height(k.cx, v, depth, k, gf), 0.0, 1e-6);
}

TEST(Geometry, PixelHeightOneFocalLengthBelow) {
  const CameraIntrinsics k = test_camera();
  GravityFrame gf;
  gf.camera_height = 1.0;
  // One focal length below the principal point at depth 1: y offset = 1.
  EXPECT_NEAR(pixel_height(k.cx, k.cy + k.fy, 1.0, k, gf), 0.0, 1e-12);
}

TEST(Geometry, PixelHeightMatchesBruteForceReconstruction) {
  const CameraIntrinsics k = test_camera();
  GravityFrame gf;
  gf.g = normalized({0.05, 0.99, 0.05});
  gf.camera_height = 1.4;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pu(0.0, k.width - 1e-9);
  std::uniform_real_distribution<double> pv(0.0, k.height - 1e-9);
  std::uniform_real_distribution<double> pz(0.2, 30.0);
  for (int i = 0; i < 500; ++i) {
    const double u = pu(rng), v = pv(rng), z = pz(rng);
    // Reconstruct the 3D point through the unit-ray route.
    const Ray r = pixel_to_ray(u, v, k);
    const Vec3 p = r.direction * (z / r.direction.z);
    const double expected = gf.camera_height - dot(p, gf.g);
    EXPECT_NEAR(pixel_height(u, v, z, k, gf), expected, 1e-9);
  }
}

TEST(Geometry, GravityFrameValidation) {
  GravityFrame gf;
  gf.g = {0.0, 2.0, 0.0};
  EXPECT_THROW(gf.validate(), std::invalid_argument);
  gf.g = {0.0, 1.0, 0.0};
  gf.camera_height = 0.0;
  EXPECT_THROW(gf.validate(), std::invalid_argument);
}

TEST(Geometry, IntrinsicsValidation) {
  CameraIntrinsics k = test_camera();
  k.fx = 0.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = test_camera();
  k.cx = static_cast<double>(k.width);
  EXPECT_THROW(k.validate(), std::invalid_argument);
}
