#pragma once

#include <memory>
#include <string>
#include <vector>

#include "refdepth/dataset.hpp"
#include "refdepth/metrics.hpp"
#include "refdepth/network.hpp"
#include "refdepth/refmap.hpp"

namespace refdepth {

/// Batch-1 forward passes over a trained (or freshly initialized) network,
/// in evaluation mode. Reusable across samples.
class InferenceEngine {
 public:
  explicit InferenceEngine(DepthNetwork& net);

  /// Predicted depth at the network's output resolution; every pixel valid.
  DepthMap predict(const GrayImage& image, const ReferenceDepthMap& reference);

  /// Nearest-neighbor upscale (used to reach ground-truth resolution before
  /// metrics; nearest preserves metric depth values exactly).
  static DepthMap upscale(const DepthMap& pred, int width, int height);

 private:
  DepthNetwork* net_;
  std::unique_ptr<DepthNetwork::Instance> inst_;
};

struct EvalOptions {
  int refine_window = 3;
  int median_window = 5;  // scan filter used when building references
  int band_lo_cm = 10, band_hi_cm = 210, band_step_cm = 10;
};

struct DatasetEval {
  MetricsReport global;
  MetricsReport global_refined;
  std::vector<HeightBandReport> by_height;
  std::vector<HeightBandReport> by_height_refined;
  int n_samples = 0;
};

/// Runs the model over every sample, upscales predictions to ground-truth
/// resolution, and pools pixels across the whole set: global and per-height
/// metrics, each for the raw and the median-refined prediction.
DatasetEval evaluate_dataset(DepthNetwork& net, const std::vector<LoadedSample>& samples,
                             const EvalOptions& opts);

// CSV writers for the reports (`metric,value` and per-band rows).
void write_metrics_csv(const std::string& path, const MetricsReport& report);
void write_height_bands_csv(const std::string& path, const std::vector<HeightBandReport>& bands);

}  // namespace refdepth
