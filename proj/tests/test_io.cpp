#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "refdepth/error.hpp"
#include "refdepth/image_io.hpp"
#include "refdepth/io.hpp"

using namespace refdepth;

namespace {

std::string temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("refdepth_io_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(ImageIo, PfmRoundTripBitExact) {
  const std::string path = temp_dir() + "/map.pfm";
  DepthMap map(7, 5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> depth(0.01f, 50.0f);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if ((x + y) % 3 != 0) map.set(x, y, depth(rng));

  write_pfm(path, map);
  const DepthMap back = read_pfm(path);
  ASSERT_EQ(back.width, map.width);
  ASSERT_EQ(back.height, map.height);
  EXPECT_EQ(back.valid, map.valid);
  for (size_t i = 0; i < map.size(); ++i)
    if (map.valid[i]) EXPECT_EQ(back.values[i], map.values[i]);  // bitwise
}

TEST(ImageIo, PfmInvalidEncodedAsMinusOne) {
  const std::string path = temp_dir() + "/invalid.pfm";
  DepthMap map(2, 1);
  map.set(0, 0, 3.5f);
  write_pfm(path, map);
  const std::string bytes = read_bytes(path);
  // header "Pf\n2 1\n-1.0\n" then row: two little-endian floats
  const size_t payload = bytes.size() - 8;
  ASSERT_EQ(payload, static_cast<size_t>(bytes.size() - 8));
  float vals[2];
  std::memcpy(vals, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(vals[0], 3.5f);
  EXPECT_EQ(vals[1], -1.0f);
}

TEST(ImageIo, PfmScanlinesBottomToTop) {
  const std::string path = temp_dir() + "/rows.pfm";
  DepthMap map(1, 2);
  map.set(0, 0, 1.0f);  // top row
  map.set(0, 1, 2.0f);  // bottom row
  write_pfm(path, map);
  const std::string bytes = read_bytes(path);
  float vals[2];
  std::memcpy(vals, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(vals[0], 2.0f);  // bottom row first
  EXPECT_EQ(vals[1], 1.0f);
}

TEST(ImageIo, PfmRejectsMalformed) {
  const std::string dir = temp_dir();
  {
    std::ofstream f(dir + "/bad_magic.pfm", std::ios::binary);
    f << "PF\n2 2\n-1.0\n";
  }
  EXPECT_THROW(read_pfm(dir + "/bad_magic.pfm"), IoError);
  {
    std::ofstream f(dir + "/truncated.pfm", std::ios::binary);
    f << "Pf\n4 4\n-1.0\nxx";
  }
  EXPECT_THROW(read_pfm(dir + "/truncated.pfm"), IoError);
  EXPECT_THROW(read_pfm(dir + "/missing.pfm"), IoError);
}

TEST(ImageIo, PgmRoundTrip) {
  const std::string path = temp_dir() + "/img.pgm";
  GrayImage img(9, 4);
  for (size_t i = 0; i < img.values.size(); ++i)
    img.values[i] = static_cast<float>(i) / (img.values.size() - 1);
  write_pgm(path, img);
  const GrayImage back = read_pgm(path);
  ASSERT_EQ(back.width, img.width);
  ASSERT_EQ(back.height, img.height);
  for (size_t i = 0; i < img.values.size(); ++i)
    EXPECT_NEAR(back.values[i], img.values[i], 0.5f / 255.0f);
}

TEST(ImageIo, MaskPgmRoundTrip) {
  const std::string path = temp_dir() + "/mask.pgm";
  const std::vector<uint8_t> mask = {1, 0, 0, 1, 1, 0};
  write_mask_pgm(path, 3, 2, mask);
  int w = 0, h = 0;
  const auto back = read_mask_pgm(path, w, h);
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 2);
  EXPECT_EQ(back, mask);
}

TEST(ScanIo, RoundTrip) {
  const std::string path = temp_dir() + "/scan.csv";
  LaserScan scan;
  scan.mount_height = 0.8;
  scan.bearings = {-0.4, -0.1, 0.05, 0.3};
  scan.ranges = {2.5f, 0.0f, 4.25f, 19.75f};
  scan.valid = {1, 0, 1, 1};
  write_scan_csv(path, scan);
  const LaserScan back = read_scan_csv(path);
  EXPECT_EQ(back.mount_height, scan.mount_height);
  EXPECT_EQ(back.bearings, scan.bearings);
  EXPECT_EQ(back.valid, scan.valid);
  for (size_t i = 0; i < scan.size(); ++i)
    if (scan.valid[i]) EXPECT_EQ(back.ranges[i], scan.ranges[i]);
}

TEST(ScanIo, MissingMountHeightRejected) {
  const std::string path = temp_dir() + "/noheight.csv";
  {
    std::ofstream f(path);
    f << "bearing_rad,range_m,valid\n0.0,1.0,1\n";
  }
  EXPECT_THROW(read_scan_csv(path), IoError);
}

TEST(CameraMetaIo, RoundTrip) {
  const std::string path = temp_dir() + "/camera.txt";
  CameraMeta meta;
  meta.intrinsics.fx = 61.25;
  meta.intrinsics.fy = 59.5;
  meta.intrinsics.cx = 32.0;
  meta.intrinsics.cy = 24.0;
  meta.intrinsics.width = 64;
  meta.intrinsics.height = 48;
  meta.gravity.camera_height = 1.05;
  meta.gravity.g = {0.0, 1.0, 0.0};
  write_camera_meta(path, meta);
  const CameraMeta back = read_camera_meta(path);
  EXPECT_EQ(back.intrinsics.fx, meta.intrinsics.fx);
  EXPECT_EQ(back.intrinsics.fy, meta.intrinsics.fy);
  EXPECT_EQ(back.intrinsics.width, meta.intrinsics.width);
  EXPECT_EQ(back.gravity.camera_height, meta.gravity.camera_height);
  EXPECT_EQ(back.gravity.g.y, 1.0);
}

TEST(KvIo, MalformedLineRejected) {
  const std::string path = temp_dir() + "/bad.txt";
  {
    std::ofstream f(path);
    f << "fx=60\nnot a pair\n";
  }
  EXPECT_THROW(read_kv(path), IoError);
}

TEST(KvIo, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.01), "0.01");
}
