#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "refdepth/geometry.hpp"
#include "refdepth/laser_scan.hpp"

namespace refdepth::testutil {

// Brute-force ray/ruled-surface intersection. The surface definition (a
// gravity-parallel line through every scan point, range linear in bearing
// between points) is densely resampled into a polyline whose chords
// approximate it far below the comparison tolerance; a pixel ray is then
// intersected with every chord by a 2D ray-segment solve in the
// gravity-orthogonal plane. Independent of the production column-fill /
// azimuth-lookup rendering path.
struct RuledSurfaceOracle {
  std::vector<double> px, pz;  // horizontal surface polyline in (e1, e2) coords
  Vec3 g, e1, e2;

  RuledSurfaceOracle(const LaserScan& scan, const GravityFrame& gf, int subdivisions = 64)
      : g(gf.g) {
    const Vec3 x_axis{1.0, 0.0, 0.0};
    e1 = normalized(x_axis - g * dot(x_axis, g));
    e2 = {e1.y * g.z - e1.z * g.y, e1.z * g.x - e1.x * g.z, e1.x * g.y - e1.y * g.x};
    std::vector<double> bearings, ranges;
    for (size_t i = 0; i < scan.size(); ++i) {
      if (!scan.valid[i]) continue;
      bearings.push_back(scan.bearings[i]);
      ranges.push_back(scan.ranges[i]);
    }
    auto push = [&](double bearing, double range) {
      px.push_back(range * std::sin(bearing));
      pz.push_back(range * std::cos(bearing));
    };
    for (size_t i = 0; i + 1 < bearings.size(); ++i) {
      // Near-radial chords (large range jumps across dropout gaps) need
      // extra pieces to track the polar-linear surface.
      const int pieces = std::max(
          subdivisions, static_cast<int>(std::ceil(std::abs(ranges[i + 1] - ranges[i]) / 0.02)));
      for (int j = 0; j < pieces; ++j) {
        const double f = static_cast<double>(j) / pieces;
        push(bearings[i] + f * (bearings[i + 1] - bearings[i]),
             ranges[i] + f * (ranges[i + 1] - ranges[i]));
      }
    }
    if (!bearings.empty()) push(bearings.back(), ranges.back());
  }

  // Perspective depth where the z-normalized pixel ray meets the surface;
  // NaN when no chord is hit.
  double depth(double a, double b) const {
    const Vec3 d{a, b, 1.0};
    const Vec3 dh = d - g * dot(d, g);
    const double u1 = dot(dh, e1), u2 = dot(dh, e2);
    double best = std::numeric_limits<double>::quiet_NaN();
    for (size_t i = 0; i + 1 < px.size(); ++i) {
      // Solve t * (u1, u2) = A + s * (B - A) for t, s.
      const double ax = px[i], az = pz[i];
      const double bx = px[i + 1] - ax, bz = pz[i + 1] - az;
      const double det = u1 * (-bz) - u2 * (-bx);
      if (std::abs(det) < 1e-15) continue;
      const double t = (ax * (-bz) - az * (-bx)) / det;
      const double s = (u1 * az - u2 * ax) / det;
      if (s < -1e-12 || s > 1.0 + 1e-12 || t <= 0.0) continue;
      if (std::isnan(best) || t < best) best = t;
    }
    return best;  // z-normalized ray: parameter == perspective depth
  }
};

}  // namespace refdepth::testutil
