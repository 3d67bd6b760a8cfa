#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace refdepth {

/// Planar 2D laser scan: one range per bearing, taken in the horizontal
/// plane at mount_height above the ground. Bearings are camera-azimuth
/// angles (radians, 0 = optical axis, positive toward +x / image right)
/// and must be strictly increasing. Invalid rays carry no range semantics.
struct LaserScan {
  double mount_height = 0.8;
  std::vector<double> bearings;
  std::vector<float> ranges;
  std::vector<uint8_t> valid;

  size_t size() const { return bearings.size(); }

  void validate() const {
    if (ranges.size() != bearings.size() || valid.size() != bearings.size())
      throw std::invalid_argument("LaserScan: field sizes disagree");
    for (size_t i = 1; i < bearings.size(); ++i)
      if (!(bearings[i] > bearings[i - 1]))
        throw std::invalid_argument("LaserScan: bearings must be strictly increasing");
    for (size_t i = 0; i < bearings.size(); ++i)
      if (valid[i] && !(ranges[i] > 0.0f))
        throw std::invalid_argument("LaserScan: valid ranges must be positive");
  }

  size_t count_valid() const {
    size_t n = 0;
    for (uint8_t v : valid) n += v ? 1 : 0;
    return n;
  }
};

}  // namespace refdepth
