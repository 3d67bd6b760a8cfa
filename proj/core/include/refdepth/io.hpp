#pragma once

#include <map>
#include <string>

#include "refdepth/geometry.hpp"
#include "refdepth/laser_scan.hpp"

namespace refdepth {

// Laser scans: CSV with header `bearing_rad,range_m,valid` preceded by a
// one-line meta header `# mount_height_m=<v>`.
void write_scan_csv(const std::string& path, const LaserScan& scan);
LaserScan read_scan_csv(const std::string& path);

// Camera meta: flat key=value text (fx, fy, cx, cy, width, height,
// camera_height, g_x, g_y, g_z).
struct CameraMeta {
  CameraIntrinsics intrinsics;
  GravityFrame gravity;
};

void write_camera_meta(const std::string& path, const CameraMeta& meta);
CameraMeta read_camera_meta(const std::string& path);

// Generic flat key=value text, one pair per line, '#' comments allowed.
void write_kv(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_kv(const std::string& path);

/// Shortest decimal round-trip formatting for doubles; all CSV/meta writers
/// use it so identical runs produce identical bytes.
std::string format_double(double v);

}  // namespace refdepth
