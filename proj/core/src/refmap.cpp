#include "refdepth/refmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refdepth/error.hpp"

namespace refdepth {

double column_bearing(int x, const CameraIntrinsics& k) {
  return std::atan(((x + 0.5) - k.cx) / k.fx);
}

LaserScan median_filter_scan(const LaserScan& scan, int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("median_filter_scan: window must be odd and >= 1");
  LaserScan out = scan;
  const int n = static_cast<int>(scan.size());
  const int hw = window / 2;
  std::vector<float> neighborhood;
  neighborhood.reserve(window);
  for (int i = 0; i < n; ++i) {
    if (!scan.valid[i]) continue;
    // Shrink symmetrically at the ends so the window stays centered (and the
    // filter is the identity on monotone scans).
    const int eff = std::min({hw, i, n - 1 - i});
    neighborhood.clear();
    for (int j = i - eff; j <= i + eff; ++j)
      if (scan.valid[j]) neighborhood.push_back(scan.ranges[j]);
    std::sort(neighborhood.begin(), neighborhood.end());
    out.ranges[i] = neighborhood[(neighborhood.size() - 1) / 2];  // lower median
  }
  return out;
}

namespace {

struct ValidView {
  std::vector<double> bearings;
  std::vector<float> ranges;
};

ValidView valid_rays(const LaserScan& scan) {
  ValidView view;
  for (size_t i = 0; i < scan.size(); ++i) {
    if (!scan.valid[i]) continue;
    view.bearings.push_back(scan.bearings[i]);
    view.ranges.push_back(scan.ranges[i]);
  }
  if (view.bearings.empty())
    throw std::invalid_argument("laser scan has no valid rays");
  return view;
}

// Linear interpolation in range over bearing; exact at nodes. The caller
// guarantees bearing lies within the view's span.
double interp_range(const ValidView& view, double bearing) {
  const auto& bs = view.bearings;
  if (bearing <= bs.front()) return view.ranges.front();
  if (bearing >= bs.back()) return view.ranges.back();
  const auto it = std::lower_bound(bs.begin(), bs.end(), bearing);
  const size_t hi = static_cast<size_t>(it - bs.begin());
  if (bs[hi] == bearing) return view.ranges[hi];
  const size_t lo = hi - 1;
  const double w = (bearing - bs[lo]) / (bs[hi] - bs[lo]);
  return view.ranges[lo] * (1.0 - w) + view.ranges[hi] * w;
}

}  // namespace

LaserScan interpolate_scan(const LaserScan& scan, const std::vector<double>& target_bearings) {
  const ValidView view = valid_rays(scan);
  for (double b : target_bearings)
    if (b < view.bearings.front() || b > view.bearings.back())
      throw std::invalid_argument("interpolate_scan: target bearing outside valid span");

  LaserScan out;
  out.mount_height = scan.mount_height;
  out.bearings = target_bearings;
  out.ranges.reserve(target_bearings.size());
  out.valid.assign(target_bearings.size(), 1);
  for (double b : target_bearings)
    out.ranges.push_back(static_cast<float>(interp_range(view, b)));
  return out;
}

ReferenceDepthMap extrude_and_render(const LaserScan& scan, const GravityFrame& gf,
                                     const CameraIntrinsics& k) {
  gf.validate();
  k.validate();
  if (std::abs(gf.g.z) > 1.0 - 1e-6)
    throw ConfigError("extrude_and_render: gravity parallel to the optical axis");

  const ValidView view = valid_rays(scan);
  const double span_lo = view.bearings.front();
  const double span_hi = view.bearings.back();

  ReferenceDepthMap ref;
  ref.depth = DepthMap(k.width, k.height);
  ref.extrapolated.assign(ref.depth.size(), 0);
  ref.interpolation_columns = static_cast<int>(scan.size());

  if (gf.is_level()) {
    // Column fill: with g along the image y axis the extruded lines are
    // image columns, so each column takes its laser point's depth.
    for (int x = 0; x < k.width; ++x) {
      const double tan_b = ((x + 0.5) - k.cx) / k.fx;
      const double bearing = std::atan(tan_b);
      const bool outside = bearing < span_lo || bearing > span_hi;
      const double r = interp_range(view, std::clamp(bearing, span_lo, span_hi));
      const float depth = static_cast<float>(r / std::sqrt(1.0 + tan_b * tan_b));
      for (int y = 0; y < k.height; ++y) {
        ref.depth.set(x, y, depth);
        if (outside) ref.extrapolated[ref.depth.idx(x, y)] = 1;
      }
    }
    return ref;
  }

  // General path: per-pixel ray-surface intersection. The surface is ruled
  // by gravity-parallel lines whose horizontal offsets from the camera's
  // vertical axis are (bearing, range) in the gravity-orthogonal plane, so a
  // ray meets it where its own horizontal azimuth equals the line bearing.
  const Vec3 x_axis{1.0, 0.0, 0.0};
  Vec3 e1 = x_axis - gf.g * dot(x_axis, gf.g);
  const double e1n = norm(e1);
  if (e1n < 1e-9)
    throw ConfigError("extrude_and_render: camera x axis parallel to gravity");
  e1 = e1 * (1.0 / e1n);
  const Vec3 e2{e1.y * gf.g.z - e1.z * gf.g.y,   // cross(e1, g)
                e1.z * gf.g.x - e1.x * gf.g.z,
                e1.x * gf.g.y - e1.y * gf.g.x};

  for (int y = 0; y < k.height; ++y) {
    const double b = ((y + 0.5) - k.cy) / k.fy;
    for (int x = 0; x < k.width; ++x) {
      const double a = ((x + 0.5) - k.cx) / k.fx;
      const Vec3 d{a, b, 1.0};
      const Vec3 dh = d - gf.g * dot(d, gf.g);
      const double dh_norm = norm(dh);
      const size_t idx = ref.depth.idx(x, y);
      if (dh_norm < 1e-9) {
        // Ray parallel to gravity never meets the surface; edge-extend.
        ref.depth.set(x, y, view.ranges.front());
        ref.extrapolated[idx] = 1;
        continue;
      }
      const double azimuth = std::atan2(dot(dh, e1), dot(dh, e2));
      const bool outside = azimuth < span_lo || azimuth > span_hi;
      const double r = interp_range(view, std::clamp(azimuth, span_lo, span_hi));
      ref.depth.set(x, y, static_cast<float>(r / dh_norm));
      if (outside) ref.extrapolated[idx] = 1;
    }
  }
  return ref;
}

ReferenceDepthMap build_reference(const LaserScan& scan, const GravityFrame& gf,
                                  const CameraIntrinsics& k, int window) {
  const LaserScan filtered = median_filter_scan(scan, window);
  const ValidView view = valid_rays(filtered);

  // One bearing per image column, restricted to the scan's valid span;
  // out-of-span columns are edge-extended by the renderer.
  std::vector<double> targets;
  targets.reserve(k.width);
  for (int x = 0; x < k.width; ++x) {
    const double b = column_bearing(x, k);
    if (b >= view.bearings.front() && b <= view.bearings.back()) targets.push_back(b);
  }

  const LaserScan dense = targets.empty() ? filtered : interpolate_scan(filtered, targets);
  return extrude_and_render(dense, gf, k);
}

}  // namespace refdepth
