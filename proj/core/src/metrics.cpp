#include "refdepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refdepth {

void MetricsAccumulator::add(double pred, double gt) {
  const double err = pred - gt;
  sum_sq_ += err * err;
  sum_rel_ += std::abs(err) / gt;
  sum_log10_ += std::abs(std::log10(pred) - std::log10(gt));
  const double ratio = std::max(pred / gt, gt / pred);
  if (ratio < 1.25) ++d1_;
  if (ratio < 1.25 * 1.25) ++d2_;
  if (ratio < 1.25 * 1.25 * 1.25) ++d3_;
  ++n_;
}

void MetricsAccumulator::add_map(const DepthMap& pred, const DepthMap& gt,
                                 const std::vector<uint8_t>* mask) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("metrics: map sizes disagree");
  if (mask && mask->size() != gt.size())
    throw std::invalid_argument("metrics: mask size mismatch");
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!pred.valid[i] || !gt.valid[i]) continue;
    if (mask && !(*mask)[i]) continue;
    add(pred.values[i], gt.values[i]);
  }
}

MetricsReport MetricsAccumulator::report() const {
  if (n_ == 0) throw std::invalid_argument("metrics: no valid pixels");
  MetricsReport r;
  r.n_pixels = n_;
  const double n = static_cast<double>(n_);
  r.rms = std::sqrt(sum_sq_ / n);
  r.rel = sum_rel_ / n;
  r.log10 = sum_log10_ / n;
  r.delta1 = 100.0 * static_cast<double>(d1_) / n;
  r.delta2 = 100.0 * static_cast<double>(d2_) / n;
  r.delta3 = 100.0 * static_cast<double>(d3_) / n;
  return r;
}

MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                              const std::vector<uint8_t>* mask) {
  MetricsAccumulator acc;
  acc.add_map(pred, gt, mask);
  return acc.report();
}

DepthMap median_refine(const DepthMap& pred, int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("median_refine: window must be odd and >= 1");
  DepthMap out = pred;
  const int hw = window / 2;
  std::vector<float> neighborhood;
  neighborhood.reserve(static_cast<size_t>(window) * window);
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x) {
      if (!pred.is_valid(x, y)) continue;
      neighborhood.clear();
      for (int dy = -hw; dy <= hw; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= pred.height) continue;
        for (int dx = -hw; dx <= hw; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= pred.width) continue;
          if (pred.is_valid(xx, yy)) neighborhood.push_back(pred.at(xx, yy));
        }
      }
      std::sort(neighborhood.begin(), neighborhood.end());
      out.at(x, y) = neighborhood[(neighborhood.size() - 1) / 2];  // lower median
    }
  return out;
}

std::vector<std::pair<double, double>> make_height_bands(int lo_cm, int hi_cm, int step_cm) {
  if (step_cm <= 0 || hi_cm < lo_cm)
    throw std::invalid_argument("make_height_bands: bad band range");
  // One band per sampled height lo, lo+step, ..., hi, each centered on its
  // height: (10, 210, 10) gives 21 bands [0.05,0.15) ... [2.05,2.15).
  std::vector<std::pair<double, double>> bands;
  for (int c = lo_cm; c <= hi_cm; c += step_cm)
    bands.emplace_back((c - step_cm / 2.0) / 100.0, (c + step_cm / 2.0) / 100.0);
  return bands;
}

int band_index(double h, const std::vector<std::pair<double, double>>& bands) {
  for (size_t b = 0; b < bands.size(); ++b)
    if (h >= bands[b].first && h < bands[b].second) return static_cast<int>(b);
  return -1;
}

std::vector<HeightBandReport> metrics_by_height(const DepthMap& pred, const DepthMap& gt,
                                                const CameraIntrinsics& k, const GravityFrame& gf,
                                                const std::vector<std::pair<double, double>>& bands) {
  if (bands.empty()) throw std::invalid_argument("metrics_by_height: no bands");
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("metrics_by_height: map sizes disagree");

  std::vector<MetricsAccumulator> accs(bands.size());
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      if (!gt.is_valid(x, y) || !pred.is_valid(x, y)) continue;
      const double h = pixel_height(x + 0.5, y + 0.5, gt.at(x, y), k, gf);
      const int b = band_index(h, bands);
      if (b >= 0) accs[b].add(pred.at(x, y), gt.at(x, y));
    }

  std::vector<HeightBandReport> reports(bands.size());
  for (size_t b = 0; b < bands.size(); ++b) {
    reports[b].lo_m = bands[b].first;
    reports[b].hi_m = bands[b].second;
    reports[b].empty = accs[b].count() == 0;
    reports[b].sum_squared_error = accs[b].sum_squared_error();
    if (!reports[b].empty) reports[b].metrics = accs[b].report();
  }
  return reports;
}

}  // namespace refdepth
