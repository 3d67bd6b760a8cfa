#include "refdepth/network.hpp"

namespace refdepth {

NetworkConfig NetworkConfig::from_run_config(const RunConfig& cfg) {
  NetworkConfig net;
  net.input_width = cfg.get_int("image_width");
  net.input_height = cfg.get_int("image_height");
  net.stem_channels = cfg.get_int("stem_channels");
  net.stage1_channels = cfg.get_int("stage1_channels");
  net.stage2_channels = cfg.get_int("stage2_channels");
  net.deconv_channels = cfg.get_int("deconv_channels");
  net.k_bins = cfg.get_int("k_bins");
  net.residual_range = cfg.get_double("residual_range");
  net.depth_min = cfg.get_double("depth_min");
  net.depth_max = cfg.get_double("depth_max");
  net.use_reference = cfg.get_bool("use_reference");
  net.use_global_skip = cfg.get_bool("use_global_skip");
  net.residual_bins = cfg.get_string("bins") == "residual";
  net.batch_norm = cfg.get_string("norm") == "batch";
  net.seed = static_cast<uint64_t>(cfg.get_int("net_seed"));
  net.resolve();
  net.validate();
  return net;
}

DepthMap resize_bilinear_dense(const DepthMap& m, int w, int h) {
  DepthMap out(w, h, 0.0f, true);
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5) * static_cast<double>(m.height) / h - 0.5;
    const int y0 = std::max(0, std::min(m.height - 1, static_cast<int>(std::floor(sy))));
    const int y1 = std::min(m.height - 1, y0 + 1);
    const double fy = std::clamp(sy - y0, 0.0, 1.0);
    for (int x = 0; x < w; ++x) {
      const double sx = (x + 0.5) * static_cast<double>(m.width) / w - 0.5;
      const int x0 = std::max(0, std::min(m.width - 1, static_cast<int>(std::floor(sx))));
      const int x1 = std::min(m.width - 1, x0 + 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0);
      const double v = (1.0 - fy) * ((1.0 - fx) * m.at(x0, y0) + fx * m.at(x1, y0)) +
                       fy * ((1.0 - fx) * m.at(x0, y1) + fx * m.at(x1, y1));
      out.at(x, y) = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace refdepth
