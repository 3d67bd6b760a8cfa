#include "refdepth/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "refdepth/ad/sgd.hpp"
#include "refdepth/error.hpp"

namespace refdepth {

TrainConfig TrainConfig::from_run_config(const RunConfig& cfg) {
  TrainConfig t;
  t.batch_size = cfg.get_int("batch_size");
  t.alpha = cfg.get_double("alpha");
  t.lr0 = cfg.get_double("lr0");
  t.lr_decay_base = cfg.get_double("lr_decay_base");
  t.lr_decay_step = cfg.get_int("lr_decay_step");
  t.iterations = cfg.get_int("iterations");
  t.momentum = cfg.get_double("momentum");
  t.augment_flip = cfg.get_bool("augment_flip");
  t.augment_scale = cfg.get_bool("augment_scale");
  t.scale_jitter_lo = cfg.get_double("scale_jitter_lo");
  t.scale_jitter_hi = cfg.get_double("scale_jitter_hi");
  t.checkpoint_interval = cfg.get_int("checkpoint_interval");
  t.seed = static_cast<uint64_t>(cfg.get_int("train_seed"));
  if (t.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (t.alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (t.iterations < 0) throw ConfigError("iterations must be >= 0");
  if (t.lr_decay_step < 1) throw ConfigError("lr_decay_step must be >= 1");
  return t;
}

double lr_at(int64_t iteration, const TrainConfig& cfg) {
  if (iteration < 0) throw std::invalid_argument("lr_at: negative iteration");
  const int64_t steps = iteration / cfg.lr_decay_step;
  return cfg.lr0 * std::pow(cfg.lr_decay_base, static_cast<double>(steps));
}

int discretize(double value, const BinSpec& bins) { return bins.discretize(value); }

void finalize_targets(TrainingSample& sample, const NetworkConfig& cfg) {
  const int ow = cfg.output_width(), oh = cfg.output_height();
  sample.gt_ds = resize_nearest(sample.gt, ow, oh);
  sample.ref_ds = resize_bilinear_dense(sample.reference.depth, ow, oh);

  const BinSpec bins = cfg.bins();
  const size_t n = sample.gt_ds.size();
  sample.target_bins.assign(n, 0);
  sample.target_depth.assign(n, 0.0f);
  sample.mask.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    if (!sample.gt_ds.valid[i]) continue;
    const double gt = sample.gt_ds.values[i];
    const double target = cfg.residual_bins ? gt - sample.ref_ds.values[i] : gt;
    sample.target_bins[i] = bins.discretize(target);
    sample.target_depth[i] = static_cast<float>(gt);
    sample.mask[i] = 1;
  }
}

TrainingSample make_training_sample(const LoadedSample& s, const NetworkConfig& cfg,
                                    int median_window) {
  TrainingSample t;
  t.image = s.image;
  t.gt = s.gt;
  t.reference = build_reference(s.scan, s.meta.gravity, s.meta.intrinsics, median_window);
  finalize_targets(t, cfg);
  return t;
}

TrainingSample augment(const TrainingSample& sample, const TrainConfig& cfg,
                       const NetworkConfig& net_cfg, std::mt19937_64& rng) {
  TrainingSample out = sample;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (cfg.augment_flip && unit(rng) < 0.5) {
    out.image = flip_horizontal(out.image);
    out.gt = flip_horizontal(out.gt);
    out.reference.depth = flip_horizontal(out.reference.depth);
    const int w = out.gt.width, h = out.gt.height;
    std::vector<uint8_t> flipped(out.reference.extrapolated.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        flipped[static_cast<size_t>(y) * w + x] =
            out.reference.extrapolated[static_cast<size_t>(y) * w + (w - 1 - x)];
    out.reference.extrapolated = std::move(flipped);
  }
  if (cfg.augment_scale) {
    const float factor =
        static_cast<float>(cfg.scale_jitter_lo + (cfg.scale_jitter_hi - cfg.scale_jitter_lo) * unit(rng));
    if (factor != 1.0f)
      for (float& v : out.image.values) v = std::min(1.0f, std::max(0.0f, v * factor));
  }
  finalize_targets(out, net_cfg);
  return out;
}

namespace {

void fill_instance(DepthNetwork::Instance& inst, const NetworkConfig& cfg,
                   const TrainingSample& s, int b) {
  fill_sample<float>(cfg, inst, b, s.image, s.reference.depth, s.ref_ds);
  const size_t n = s.mask.size();
  const size_t base = static_cast<size_t>(b) * n;
  std::copy(s.target_bins.begin(), s.target_bins.end(), inst.target_bins.begin() + base);
  std::copy(s.target_depth.begin(), s.target_depth.end(), inst.target_depth.begin() + base);
  std::copy(s.mask.begin(), s.mask.end(), inst.mask.begin() + base);
}

}  // namespace

TrainResult train(const std::vector<TrainingSample>& dataset, DepthNetwork& net,
                  const TrainConfig& cfg, const std::string& out_dir) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  std::filesystem::create_directories(out_dir);

  TrainResult result;
  result.checkpoint_path = out_dir + "/checkpoint.ckpt";
  result.loss_log_path = out_dir + "/loss_log.csv";

  std::ofstream log(result.loss_log_path);
  if (!log) throw IoError("cannot write loss log: " + result.loss_log_path);
  log << "iter,loss,loss_cls,loss_reg,lr\n";

  auto inst = net.build(cfg.batch_size, /*with_loss=*/true, static_cast<float>(cfg.alpha));
  inst->graph.training = true;
  inst->graph.update_bn_stats = true;

  ad::SgdOptimizer<float> sgd(net.parameters(), static_cast<float>(cfg.momentum));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);

  for (int64_t n = 0; n < cfg.iterations; ++n) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const TrainingSample s = augment(dataset[pick(rng)], cfg, net.config(), rng);
      fill_instance(*inst, net.config(), s, b);
    }
    inst->graph.forward();

    const double loss = inst->loss.val()[0];
    const double loss_cls = inst->loss_cls.val()[0];
    const double loss_reg = inst->loss_reg.val()[0];
    const double lr = lr_at(n, cfg);
    log << n << "," << format_double(loss) << "," << format_double(loss_cls) << ","
        << format_double(loss_reg) << "," << format_double(lr) << "\n";

    if (!std::isfinite(loss))
      throw NumericError("train: non-finite loss at iteration " + std::to_string(n));

    inst->graph.backward(inst->loss);
    sgd.step(static_cast<float>(lr));
    result.final_loss = loss;

    if (cfg.checkpoint_interval > 0 && (n + 1) % cfg.checkpoint_interval == 0)
      net.save(out_dir + "/checkpoint_" + std::to_string(n + 1) + ".ckpt");
    result.iterations_run = n + 1;
  }

  net.save(result.checkpoint_path);
  log.flush();
  if (!log) throw IoError("loss log write failed");
  return result;
}

}  // namespace refdepth
