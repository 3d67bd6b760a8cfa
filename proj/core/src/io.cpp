#include "refdepth/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "refdepth/error.hpp"

namespace refdepth {

std::string format_double(double v) {
  char buf[64];
  // %.17g round-trips any double; trim to the shortest representation that
  // still round-trips so files stay readable.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

void write_scan_csv(const std::string& path, const LaserScan& scan) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# mount_height_m=" << format_double(scan.mount_height) << "\n";
  f << "bearing_rad,range_m,valid\n";
  for (size_t i = 0; i < scan.size(); ++i) {
    f << format_double(scan.bearings[i]) << ","
      << format_double(scan.valid[i] ? scan.ranges[i] : 0.0f) << ","
      << (scan.valid[i] ? 1 : 0) << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

LaserScan read_scan_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  LaserScan scan;
  std::string line;
  bool have_height = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("mount_height_m=");
      if (pos != std::string::npos) {
        scan.mount_height = std::strtod(line.c_str() + pos + 15, nullptr);
        have_height = true;
      }
      continue;
    }
    if (line.rfind("bearing_rad", 0) == 0) continue;  // header row
    std::istringstream ss(line);
    std::string bearing, range, valid;
    if (!std::getline(ss, bearing, ',') || !std::getline(ss, range, ',') ||
        !std::getline(ss, valid, ','))
      throw IoError("malformed scan row in " + path + ": " + line);
    scan.bearings.push_back(std::strtod(bearing.c_str(), nullptr));
    scan.ranges.push_back(static_cast<float>(std::strtod(range.c_str(), nullptr)));
    scan.valid.push_back(valid == "1" ? 1 : 0);
  }
  if (!have_height) throw IoError("scan file missing mount_height_m header: " + path);
  scan.validate();
  return scan;
}

void write_kv(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (const auto& [key, value] : kv) f << key << "=" << value << "\n";
  if (!f) throw IoError("write failed: " + path);
}

std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_camera_meta(const std::string& path, const CameraMeta& meta) {
  std::map<std::string, std::string> kv;
  kv["fx"] = format_double(meta.intrinsics.fx);
  kv["fy"] = format_double(meta.intrinsics.fy);
  kv["cx"] = format_double(meta.intrinsics.cx);
  kv["cy"] = format_double(meta.intrinsics.cy);
  kv["width"] = std::to_string(meta.intrinsics.width);
  kv["height"] = std::to_string(meta.intrinsics.height);
  kv["camera_height"] = format_double(meta.gravity.camera_height);
  kv["g_x"] = format_double(meta.gravity.g.x);
  kv["g_y"] = format_double(meta.gravity.g.y);
  kv["g_z"] = format_double(meta.gravity.g.z);
  write_kv(path, kv);
}

CameraMeta read_camera_meta(const std::string& path) {
  const auto kv = read_kv(path);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError(path + ": missing camera key " + key);
    return it->second;
  };
  CameraMeta meta;
  meta.intrinsics.fx = std::strtod(get("fx").c_str(), nullptr);
  meta.intrinsics.fy = std::strtod(get("fy").c_str(), nullptr);
  meta.intrinsics.cx = std::strtod(get("cx").c_str(), nullptr);
  meta.intrinsics.cy = std::strtod(get("cy").c_str(), nullptr);
  meta.intrinsics.width = std::stoi(get("width"));
  meta.intrinsics.height = std::stoi(get("height"));
  meta.gravity.camera_height = std::strtod(get("camera_height").c_str(), nullptr);
  meta.gravity.g.x = std::strtod(get("g_x").c_str(), nullptr);
  meta.gravity.g.y = std::strtod(get("g_y").c_str(), nullptr);
  meta.gravity.g.z = std::strtod(get("g_z").c_str(), nullptr);
  meta.intrinsics.validate();
  meta.gravity.validate();
  return meta;
}

}  // namespace refdepth
