#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refdepth/depth_map.hpp"
#include "refdepth/geometry.hpp"
#include "refdepth/laser_scan.hpp"

namespace refdepth {

/// Dense depth raster constructed from a planar laser scan. Every pixel is
/// valid by construction; pixels whose column lies outside the scan's bearing
/// span were filled by nearest-edge extension and are flagged `extrapolated`.
struct ReferenceDepthMap {
  DepthMap depth;
  std::vector<uint8_t> extrapolated;
  // provenance
  std::string source_scan;        // caller-supplied id/path; may be empty
  int interpolation_columns = 0;  // bearings the renderer consumed
};

/// Sliding median over valid ranges; invalid neighbors are skipped, invalid
/// rays stay invalid, bearings are untouched. Window must be odd.
LaserScan median_filter_scan(const LaserScan& scan, int window);

/// Resamples the scan at the given bearings by linear interpolation in range
/// over bearing between the two nearest valid rays. Every target must lie
/// within the valid bearing span; the output is fully valid.
LaserScan interpolate_scan(const LaserScan& scan, const std::vector<double>& target_bearings);

/// Lifts each laser point to 3D at the mount height, extrudes a line through
/// it along gravity, and renders the resulting ruled surface to the image.
/// For a level camera (g aligned with the image y axis) this reduces to
/// column fill: every pixel of column u takes the depth of that column's
/// laser point. Columns outside the scan's bearing span take the nearest
/// edge value and are flagged extrapolated.
ReferenceDepthMap extrude_and_render(const LaserScan& scan, const GravityFrame& gf,
                                     const CameraIntrinsics& k);

/// Full pipeline: median filter -> interpolate to one bearing per image
/// column -> extrude and render.
ReferenceDepthMap build_reference(const LaserScan& scan, const GravityFrame& gf,
                                  const CameraIntrinsics& k, int window = 5);

/// Camera-azimuth bearing of image column x (sampled at the column center).
double column_bearing(int x, const CameraIntrinsics& k);

}  // namespace refdepth
