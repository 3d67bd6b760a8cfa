#include "refdepth/evaluate.hpp"

#include <fstream>

#include "refdepth/error.hpp"
#include "refdepth/io.hpp"

namespace refdepth {

InferenceEngine::InferenceEngine(DepthNetwork& net) : net_(&net) {
  inst_ = net_->build(1, /*with_loss=*/false, 0.0f);
  inst_->graph.training = false;
  inst_->graph.update_bn_stats = false;
}

DepthMap InferenceEngine::predict(const GrayImage& image, const ReferenceDepthMap& reference) {
  const NetworkConfig& cfg = net_->config();
  const DepthMap ref_ds =
      resize_bilinear_dense(reference.depth, cfg.output_width(), cfg.output_height());
  fill_sample<float>(cfg, *inst_, 0, image, reference.depth, ref_ds);
  inst_->graph.forward();

  DepthMap out(cfg.output_width(), cfg.output_height(), 0.0f, true);
  const float* pv = inst_->predicted.val();
  std::copy(pv, pv + out.size(), out.values.begin());
  return out;
}

DepthMap InferenceEngine::upscale(const DepthMap& pred, int width, int height) {
  return resize_nearest(pred, width, height);
}

DatasetEval evaluate_dataset(DepthNetwork& net, const std::vector<LoadedSample>& samples,
                             const EvalOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("evaluate_dataset: no samples");
  InferenceEngine engine(net);
  const auto bands = make_height_bands(opts.band_lo_cm, opts.band_hi_cm, opts.band_step_cm);

  MetricsAccumulator global, global_refined;
  std::vector<MetricsAccumulator> by_height(bands.size()), by_height_refined(bands.size());

  for (const LoadedSample& s : samples) {
    ReferenceDepthMap ref =
        build_reference(s.scan, s.meta.gravity, s.meta.intrinsics, opts.median_window);
    ref.source_scan = s.prefix;
    const DepthMap pred_out = engine.predict(s.image, ref);
    const DepthMap refined_out = median_refine(pred_out, opts.refine_window);
    const DepthMap pred = InferenceEngine::upscale(pred_out, s.gt.width, s.gt.height);
    const DepthMap refined = InferenceEngine::upscale(refined_out, s.gt.width, s.gt.height);

    global.add_map(pred, s.gt);
    global_refined.add_map(refined, s.gt);
    for (int y = 0; y < s.gt.height; ++y)
      for (int x = 0; x < s.gt.width; ++x) {
        if (!s.gt.is_valid(x, y)) continue;
        const double h =
            pixel_height(x + 0.5, y + 0.5, s.gt.at(x, y), s.meta.intrinsics, s.meta.gravity);
        const int b = band_index(h, bands);
        if (b < 0) continue;
        by_height[b].add(pred.at(x, y), s.gt.at(x, y));
        by_height_refined[b].add(refined.at(x, y), s.gt.at(x, y));
      }
  }

  DatasetEval eval;
  eval.n_samples = static_cast<int>(samples.size());
  eval.global = global.report();
  eval.global_refined = global_refined.report();
  auto collect = [&](std::vector<MetricsAccumulator>& accs) {
    std::vector<HeightBandReport> reports(bands.size());
    for (size_t b = 0; b < bands.size(); ++b) {
      reports[b].lo_m = bands[b].first;
      reports[b].hi_m = bands[b].second;
      reports[b].empty = accs[b].count() == 0;
      reports[b].sum_squared_error = accs[b].sum_squared_error();
      if (!reports[b].empty) reports[b].metrics = accs[b].report();
    }
    return reports;
  };
  eval.by_height = collect(by_height);
  eval.by_height_refined = collect(by_height_refined);
  return eval;
}

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "metric,value\n";
  f << "rms," << format_double(report.rms) << "\n";
  f << "rel," << format_double(report.rel) << "\n";
  f << "log10," << format_double(report.log10) << "\n";
  f << "delta1," << format_double(report.delta1) << "\n";
  f << "delta2," << format_double(report.delta2) << "\n";
  f << "delta3," << format_double(report.delta3) << "\n";
  f << "n_pixels," << report.n_pixels << "\n";
  if (!f) throw IoError("write failed: " + path);
}

void write_height_bands_csv(const std::string& path, const std::vector<HeightBandReport>& bands) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "band_lo_cm,band_hi_cm,rms,rel,log10,d1,d2,d3\n";
  for (const auto& b : bands) {
    if (b.empty) continue;  // empty bands are excluded
    f << std::lround(b.lo_m * 100.0) << "," << std::lround(b.hi_m * 100.0) << ","
      << format_double(b.metrics.rms) << "," << format_double(b.metrics.rel) << ","
      << format_double(b.metrics.log10) << "," << format_double(b.metrics.delta1) << ","
      << format_double(b.metrics.delta2) << "," << format_double(b.metrics.delta3) << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace refdepth
