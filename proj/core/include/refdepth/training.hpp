#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "refdepth/dataset.hpp"
#include "refdepth/network.hpp"
#include "refdepth/refmap.hpp"

namespace refdepth {

struct TrainConfig {
  int batch_size = 16;
  double alpha = 1.0;  // weight of the regression term
  double lr0 = 1e-2;
  double lr_decay_base = 0.98;
  int lr_decay_step = 1000;
  int iterations = 500;
  double momentum = 0.9;
  bool augment_flip = true;
  bool augment_scale = true;
  double scale_jitter_lo = 0.8;
  double scale_jitter_hi = 1.2;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  uint64_t seed = 1;

  static TrainConfig from_run_config(const RunConfig& cfg);
};

/// Stepped exponential schedule: lr0 * base^floor(n / step).
double lr_at(int64_t iteration, const TrainConfig& cfg);

/// One training example with everything the loss needs. Full-resolution
/// rasters come first; the output-resolution targets are derived from them
/// (and must be rebuilt after any augmentation).
struct TrainingSample {
  GrayImage image;
  DepthMap gt;
  ReferenceDepthMap reference;

  // Output resolution, derived by finalize_targets:
  DepthMap gt_ds;    // nearest-neighbor: metric values preserved
  DepthMap ref_ds;   // bilinear: the global-skip input
  std::vector<int> target_bins;
  std::vector<float> target_depth;
  std::vector<uint8_t> mask;  // valid ground truth at output resolution
};

/// Bin index of a residual (or absolute depth, per the bin mode); values
/// beyond the bin range clamp to the edge bins.
int discretize(double value, const BinSpec& bins);

/// Builds gt_ds / ref_ds / per-pixel targets: in residual mode the target
/// bin is discretize(gt - reference), in absolute mode discretize(gt).
/// Pixels without valid ground truth are masked out.
void finalize_targets(TrainingSample& sample, const NetworkConfig& cfg);

/// Reference construction plus target finalization for one dataset sample.
TrainingSample make_training_sample(const LoadedSample& s, const NetworkConfig& cfg,
                                    int median_window = 5);

/// Horizontal flip (all rasters coherently) with probability 1/2 and uniform
/// scale jitter of the image values; targets are rebuilt so they stay
/// consistent with the augmented rasters.
TrainingSample augment(const TrainingSample& sample, const TrainConfig& cfg,
                       const NetworkConfig& net_cfg, std::mt19937_64& rng);

struct TrainResult {
  std::string checkpoint_path;
  std::string loss_log_path;
  double final_loss = 0.0;
  int64_t iterations_run = 0;
};

/// Minibatch SGD over the combined classification+regression objective.
/// Writes `iter,loss,loss_cls,loss_reg,lr` rows to out_dir/loss_log.csv,
/// periodic checkpoints when configured, and a final checkpoint.ckpt.
/// Deterministic given the config seed. A non-finite loss aborts with
/// NumericError; previously written checkpoints are retained.
TrainResult train(const std::vector<TrainingSample>& dataset, DepthNetwork& net,
                  const TrainConfig& cfg, const std::string& out_dir);

}  // namespace refdepth
