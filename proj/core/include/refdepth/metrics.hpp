#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "refdepth/depth_map.hpp"
#include "refdepth/geometry.hpp"

namespace refdepth {

struct MetricsReport {
  double rms = 0.0;     // meters
  double rel = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;  // percent
  double delta2 = 0.0;
  double delta3 = 0.0;
  int64_t n_pixels = 0;
};

/// Streaming accumulator so whole-dataset metrics pool pixels across maps.
/// Squared errors and counts recombine over any disjoint pixel partition.
class MetricsAccumulator {
 public:
  void add(double pred, double gt);
  void add_map(const DepthMap& pred, const DepthMap& gt,
               const std::vector<uint8_t>* mask = nullptr);
  MetricsReport report() const;  // throws on an empty accumulator
  int64_t count() const { return n_; }
  double sum_squared_error() const { return sum_sq_; }

 private:
  double sum_sq_ = 0.0, sum_rel_ = 0.0, sum_log10_ = 0.0;
  int64_t d1_ = 0, d2_ = 0, d3_ = 0, n_ = 0;
};

/// rms / rel / log10 and the delta thresholds (delta = 1.25, strict <) over
/// pixels valid in both maps (and in the optional extra mask). Throws when
/// the effective mask is empty.
MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                              const std::vector<uint8_t>* mask = nullptr);

/// 2D median filter over valid neighbors; validity is preserved. Window must
/// be odd.
DepthMap median_refine(const DepthMap& pred, int window);

struct HeightBandReport {
  double lo_m = 0.0, hi_m = 0.0;  // height interval [lo, hi)
  MetricsReport metrics;
  bool empty = true;
  double sum_squared_error = 0.0;
};

/// Metrics stratified by the height above ground of each ground-truth pixel
/// (bands are [lo, hi) intervals in meters). Bands without pixels come back
/// flagged empty.
std::vector<HeightBandReport> metrics_by_height(const DepthMap& pred, const DepthMap& gt,
                                                const CameraIntrinsics& k, const GravityFrame& gf,
                                                const std::vector<std::pair<double, double>>& bands);

/// One band per sampled height lo..hi (centimeters), each step_cm wide and
/// centered on its height: (10, 210, 10) -> 21 bands [0.05,0.15)...[2.05,2.15).
std::vector<std::pair<double, double>> make_height_bands(int lo_cm, int hi_cm, int step_cm);

/// Index of the band containing height h, or -1. Bands are [lo, hi).
int band_index(double h, const std::vector<std::pair<double, double>>& bands);

}  // namespace refdepth
