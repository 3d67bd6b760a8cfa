#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "refdepth/ad/checkpoint.hpp"
#include "refdepth/ad/graph.hpp"
#include "refdepth/config.hpp"
#include "refdepth/depth_map.hpp"
#include "refdepth/error.hpp"

namespace refdepth {

/// Discretization of depth (residual depth in the default mode) into K bin
/// centers. Residual bins are symmetric about zero with an exact zero center
/// at index (K-1)/2; absolute bins span [depth_min, depth_max].
struct BinSpec {
  int k = 0;
  std::vector<double> centers;

  static BinSpec residual(int k, double range_m) {
    if (k < 3 || k % 2 == 0)
      throw std::invalid_argument("BinSpec: residual bins need odd K >= 3");
    if (!(range_m > 0.0)) throw std::invalid_argument("BinSpec: range must be positive");
    BinSpec spec;
    spec.k = k;
    const int m = (k - 1) / 2;
    const double step = range_m / m;
    spec.centers.resize(k);
    // (i - m) * step keeps the centers bitwise symmetric about the exact
    // zero at index m.
    for (int i = 0; i < k; ++i) spec.centers[i] = (i - m) * step;
    return spec;
  }

  static BinSpec absolute(int k, double depth_min, double depth_max) {
    if (k < 2) throw std::invalid_argument("BinSpec: absolute bins need K >= 2");
    if (!(depth_max > depth_min)) throw std::invalid_argument("BinSpec: empty depth range");
    BinSpec spec;
    spec.k = k;
    const double step = (depth_max - depth_min) / (k - 1);
    spec.centers.resize(k);
    for (int i = 0; i < k; ++i) spec.centers[i] = depth_min + i * step;
    return spec;
  }

  double spacing() const { return centers[1] - centers[0]; }

  /// Index of the nearest bin center; values beyond the ends clamp to the
  /// edge bins.
  int discretize(double value) const {
    const long i = std::lround((value - centers.front()) / spacing());
    return static_cast<int>(std::clamp(i, 0L, static_cast<long>(k - 1)));
  }
};

struct NetworkConfig {
  int input_width = 64;
  int input_height = 48;
  int stem_channels = 16;
  int stage1_channels = 16;
  int stage2_channels = 32;
  int deconv_channels = 16;
  int k_bins = 101;
  double residual_range = 2.0;
  double depth_min = 0.1;
  double depth_max = 20.0;
  bool use_reference = true;    // reference depth as a second input channel
  bool use_global_skip = true;  // add the reference back after decoding
  bool residual_bins = true;    // bins over [-R, R]; false: over [dmin, dmax]
  bool batch_norm = true;       // false: per-channel affine only
  uint64_t seed = 1;

  static NetworkConfig from_run_config(const RunConfig& cfg);

  int in_channels() const { return 2; }  // fixed so ablations keep capacity
  int output_width() const { return input_width / 2; }
  int output_height() const { return input_height / 2; }

  /// Ablations cascade: no reference input means no skip, and no skip means
  /// the bins must encode absolute depth.
  void resolve() {
    if (!use_reference) use_global_skip = false;
    if (!use_global_skip) residual_bins = false;
  }

  void validate() const {
    if (k_bins < 3 || k_bins % 2 == 0)
      throw ConfigError("network: k_bins must be odd and >= 3");
    if (input_width % 8 != 0 || input_height % 8 != 0 || input_width < 16 || input_height < 16)
      throw ConfigError("network: input size must be a multiple of 8 and >= 16");
    if (!(depth_max > depth_min) || !(depth_min > 0.0))
      throw ConfigError("network: need 0 < depth_min < depth_max");
    if (!(residual_range > 0.0)) throw ConfigError("network: residual_range must be positive");
    if (residual_bins && !use_global_skip)
      throw ConfigError("network: residual bins require the global skip");
  }

  BinSpec bins() const {
    return residual_bins ? BinSpec::residual(k_bins, residual_range)
                         : BinSpec::absolute(k_bins, depth_min, depth_max);
  }
};

/// Bilinear resample of a dense raster (every pixel assumed valid), used to
/// bring the reference map to the network's output resolution for the skip.
DepthMap resize_bilinear_dense(const DepthMap& m, int w, int h);

/// Parameter handles for one residual block. Null BnState pointers select
/// per-channel affine normalization instead of batch statistics.
template <typename S>
struct ResidualBlockParams {
  ad::Tensor<S> conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
  ad::Tensor<S> norm1_gamma, norm1_beta, norm2_gamma, norm2_beta, norm3_gamma, norm3_beta;
  ad::BnState<S>* bn1 = nullptr;
  ad::BnState<S>* bn2 = nullptr;
  ad::BnState<S>* bn3 = nullptr;
  ad::Tensor<S> shortcut_w, shortcut_b;  // scaled blocks only
};

/// One residual block: out = relu(F(x) + h(x)) with
/// F = conv-norm-relu-conv-norm-relu-conv-norm (1x1, 3x3, 1x1) and h either
/// the identity (identical type; shapes must match) or a strided 1x1
/// convolution (scaled type).
template <typename S>
ad::Tensor<S> residual_block(ad::Graph<S>& g, ad::Tensor<S> x, const ResidualBlockParams<S>& p,
                             bool scaled, int stride) {
  if (!scaled && stride != 1)
    throw std::invalid_argument("residual_block: identical type requires stride 1");
  auto norm = [&](ad::Tensor<S> t, const ad::Tensor<S>& gamma, const ad::Tensor<S>& beta,
                  ad::BnState<S>* st) {
    return st ? g.batch_norm(std::move(t), gamma, beta, st)
              : g.channel_affine(std::move(t), gamma, beta);
  };
  ad::Tensor<S> f = g.relu(
      norm(g.conv2d(x, p.conv1_w, p.conv1_b, stride, 0), p.norm1_gamma, p.norm1_beta, p.bn1));
  f = g.relu(norm(g.conv2d(f, p.conv2_w, p.conv2_b, 1, 1), p.norm2_gamma, p.norm2_beta, p.bn2));
  f = norm(g.conv2d(f, p.conv3_w, p.conv3_b, 1, 0), p.norm3_gamma, p.norm3_beta, p.bn3);
  ad::Tensor<S> h = scaled ? g.conv2d(x, p.shortcut_w, p.shortcut_b, stride, 0) : x;
  return g.relu(g.add(f, h));
}

/// The residual-of-residual depth network. The trunk is a stem convolution,
/// four bottleneck residual blocks (scaled, identical, scaled, identical)
/// and two transposed-convolution stages back up to half input resolution,
/// ending in a zero-initialized 1x1 head that emits K logits per pixel.
/// Decoding takes the per-pixel softmax expectation over bin centers and, in
/// residual mode, adds the (downsampled) reference map through the global
/// identity skip, so an untrained network predicts the reference exactly.
template <typename S>
class DepthNetworkT {
 public:
  explicit DepthNetworkT(NetworkConfig cfg) : cfg_(cfg) {
    cfg_.resolve();
    cfg_.validate();
    init_parameters();
  }

  const NetworkConfig& config() const { return cfg_; }

  std::vector<ad::Tensor<S>>& parameters() { return params_; }

  /// A built forward (and optionally loss) graph over a fixed batch size.
  /// Input/target buffers live here; refill them and call graph.forward().
  struct Instance {
    ad::Graph<S> graph;
    ad::Tensor<S> input;     // (B, 2, H, W): channel 0 image, channel 1 reference
    ad::Tensor<S> logits;    // (B, K, H/2, W/2)
    ad::Tensor<S> probs;
    ad::Tensor<S> expectation;
    ad::Tensor<S> predicted;  // (B, 1, H/2, W/2), clamped to [depth_min, depth_max]
    std::vector<S> skip_map;  // constant skip input, output resolution

    // Present when built with losses:
    ad::Tensor<S> loss_cls, loss_reg, loss;
    std::vector<int> target_bins;
    std::vector<S> target_depth;
    std::vector<uint8_t> mask;

    int batch = 0;
  };

  std::unique_ptr<Instance> build(int batch, bool with_loss, S alpha) {
    auto inst = std::make_unique<Instance>();
    inst->batch = batch;
    const int H = cfg_.input_height, W = cfg_.input_width;
    const int oh = cfg_.output_height(), ow = cfg_.output_width();
    const int64_t opix = static_cast<int64_t>(batch) * oh * ow;
    inst->input = ad::Tensor<S>::zeros({batch, cfg_.in_channels(), H, W});
    inst->skip_map.assign(opix, S(0));

    ad::Graph<S>& g = inst->graph;
    int bn = 0;  // norm-layer cursor, matches registration order

    auto norm = [&](ad::Tensor<S> x, int channels) {
      ad::Tensor<S> gamma = find_param(norm_name(bn) + ".gamma");
      ad::Tensor<S> beta = find_param(norm_name(bn) + ".beta");
      (void)channels;
      ad::Tensor<S> out = cfg_.batch_norm ? g.batch_norm(x, gamma, beta, &bn_states_[bn])
                                          : g.channel_affine(x, gamma, beta);
      ++bn;
      return out;
    };
    auto conv = [&](ad::Tensor<S> x, const std::string& name, int stride, int padding) {
      return g.conv2d(std::move(x), find_param(name + ".weight"), find_param(name + ".bias"),
                      stride, padding);
    };

    // Stem: 3x3 stride-2 convolution.
    ad::Tensor<S> t = g.relu(norm(conv(inst->input, "stem", 2, 1), cfg_.stem_channels));

    auto block = [&](ad::Tensor<S> x, const std::string& name, int stride, bool scaled) {
      ResidualBlockParams<S> p;
      p.conv1_w = find_param(name + ".conv1.weight");
      p.conv1_b = find_param(name + ".conv1.bias");
      p.conv2_w = find_param(name + ".conv2.weight");
      p.conv2_b = find_param(name + ".conv2.bias");
      p.conv3_w = find_param(name + ".conv3.weight");
      p.conv3_b = find_param(name + ".conv3.bias");
      auto take_norm = [&](ad::Tensor<S>& gamma, ad::Tensor<S>& beta, ad::BnState<S>*& st) {
        gamma = find_param(norm_name(bn) + ".gamma");
        beta = find_param(norm_name(bn) + ".beta");
        st = cfg_.batch_norm ? &bn_states_[bn] : nullptr;
        ++bn;
      };
      take_norm(p.norm1_gamma, p.norm1_beta, p.bn1);
      take_norm(p.norm2_gamma, p.norm2_beta, p.bn2);
      take_norm(p.norm3_gamma, p.norm3_beta, p.bn3);
      if (scaled) {
        p.shortcut_w = find_param(name + ".shortcut.weight");
        p.shortcut_b = find_param(name + ".shortcut.bias");
      }
      return residual_block(g, std::move(x), p, scaled, stride);
    };

    t = block(t, "block1", 2, true);
    t = block(t, "block2", 1, false);
    t = block(t, "block3", 2, true);
    t = block(t, "block4", 1, false);

    // Upsampling head: two stride-2 transposed convolutions.
    t = g.relu(norm(g.conv2d_transpose(t, find_param("deconv1.weight"), 2, 1),
                    cfg_.deconv_channels));
    t = g.relu(norm(g.conv2d_transpose(t, find_param("deconv2.weight"), 2, 1),
                    cfg_.deconv_channels));

    inst->logits = conv(t, "head", 1, 0);
    inst->probs = g.softmax_channels(inst->logits);

    const BinSpec bins = cfg_.bins();
    std::vector<S> centers(bins.centers.begin(), bins.centers.end());
    inst->expectation = g.channel_expectation(inst->probs, std::move(centers));

    ad::Tensor<S> raw = cfg_.use_global_skip
                            ? g.add_const_map(inst->expectation, &inst->skip_map)
                            : inst->expectation;
    inst->predicted = g.clamp(raw, static_cast<S>(cfg_.depth_min), static_cast<S>(cfg_.depth_max));

    if (with_loss) {
      inst->target_bins.assign(opix, 0);
      inst->target_depth.assign(opix, S(0));
      inst->mask.assign(opix, 0);
      inst->loss_cls = g.nll_channel_loss(inst->probs, &inst->target_bins, &inst->mask);
      inst->loss_reg = g.l1_loss(inst->predicted, &inst->target_depth, &inst->mask);
      inst->loss = g.affine_combine(inst->loss_cls, inst->loss_reg, alpha);
    }
    return inst;
  }

  void save(const std::string& path) const {
    std::vector<ad::NamedTensor> tensors;
    for (const auto& p : params_) {
      ad::NamedTensor t;
      t.name = p.name();
      t.dims = p.dims();
      t.data.assign(p.val(), p.val() + p.numel());
      tensors.push_back(std::move(t));
    }
    for (size_t i = 0; i < bn_states_.size(); ++i) {
      const auto& st = bn_states_[i];
      tensors.push_back({norm_name(static_cast<int>(i)) + ".running_mean",
                         {static_cast<int>(st.running_mean.size())},
                         std::vector<float>(st.running_mean.begin(), st.running_mean.end())});
      tensors.push_back({norm_name(static_cast<int>(i)) + ".running_var",
                         {static_cast<int>(st.running_var.size())},
                         std::vector<float>(st.running_var.begin(), st.running_var.end())});
    }
    ad::save_checkpoint(path, tensors);
  }

  void load(const std::string& path) {
    const auto tensors = ad::load_checkpoint(path);
    size_t used = 0;
    for (const ad::NamedTensor& t : tensors) {
      if (auto* p = try_find_param(t.name)) {
        if (p->dims() != t.dims) throw IoError("checkpoint shape mismatch for " + t.name);
        std::copy(t.data.begin(), t.data.end(), p->val());
        ++used;
        continue;
      }
      if (load_bn_buffer(t)) {
        ++used;
        continue;
      }
      throw IoError("checkpoint contains unknown tensor " + t.name);
    }
    if (used != params_.size() + 2 * bn_states_.size())
      throw IoError("checkpoint is missing tensors: " + path);
  }

  std::deque<ad::BnState<S>>& bn_states() { return bn_states_; }

 private:
  static std::string norm_name(int i) { return "norm" + std::to_string(i); }

  ad::Tensor<S>* try_find_param(const std::string& name) {
    for (auto& p : params_)
      if (p.name() == name) return &p;
    return nullptr;
  }

  ad::Tensor<S> find_param(const std::string& name) {
    if (auto* p = try_find_param(name)) return *p;
    throw std::logic_error("unknown parameter " + name);
  }

  bool load_bn_buffer(const ad::NamedTensor& t) {
    for (size_t i = 0; i < bn_states_.size(); ++i) {
      if (t.name == norm_name(static_cast<int>(i)) + ".running_mean") {
        if (t.data.size() != bn_states_[i].running_mean.size())
          throw IoError("checkpoint shape mismatch for " + t.name);
        std::copy(t.data.begin(), t.data.end(), bn_states_[i].running_mean.begin());
        return true;
      }
      if (t.name == norm_name(static_cast<int>(i)) + ".running_var") {
        if (t.data.size() != bn_states_[i].running_var.size())
          throw IoError("checkpoint shape mismatch for " + t.name);
        std::copy(t.data.begin(), t.data.end(), bn_states_[i].running_var.begin());
        return true;
      }
    }
    return false;
  }

  ad::Tensor<S> new_param(const std::string& name, std::vector<int> dims) {
    ad::Tensor<S> t = ad::Tensor<S>::zeros(std::move(dims), name);
    params_.push_back(t);
    return t;
  }

  void he_fill(ad::Tensor<S>& w, int fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w.val()[i] = static_cast<S>(dist(rng_));
  }

  void add_conv(const std::string& name, int out_ch, int in_ch, int k) {
    auto w = new_param(name + ".weight", {out_ch, in_ch, k, k});
    he_fill(w, in_ch * k * k);
    new_param(name + ".bias", {out_ch});
  }

  void add_norm(int channels) {
    const int i = static_cast<int>(bn_states_.size());
    auto gamma = new_param(norm_name(i) + ".gamma", {channels});
    std::fill(gamma.val(), gamma.val() + channels, S(1));
    new_param(norm_name(i) + ".beta", {channels});
    bn_states_.emplace_back(channels);
  }

  void init_parameters() {
    rng_.seed(cfg_.seed);
    add_conv("stem", cfg_.stem_channels, cfg_.in_channels(), 3);
    add_norm(cfg_.stem_channels);

    auto add_block = [&](const std::string& name, int in_ch, int out_ch, bool scaled) {
      const int mid = std::max(4, out_ch / 2);
      add_conv(name + ".conv1", mid, in_ch, 1);
      add_norm(mid);
      add_conv(name + ".conv2", mid, mid, 3);
      add_norm(mid);
      add_conv(name + ".conv3", out_ch, mid, 1);
      add_norm(out_ch);
      if (scaled) add_conv(name + ".shortcut", out_ch, in_ch, 1);
    };
    add_block("block1", cfg_.stem_channels, cfg_.stage1_channels, true);
    add_block("block2", cfg_.stage1_channels, cfg_.stage1_channels, false);
    add_block("block3", cfg_.stage1_channels, cfg_.stage2_channels, true);
    add_block("block4", cfg_.stage2_channels, cfg_.stage2_channels, false);

    auto d1 = new_param("deconv1.weight", {cfg_.stage2_channels, cfg_.deconv_channels, 4, 4});
    he_fill(d1, cfg_.stage2_channels * 16);
    add_norm(cfg_.deconv_channels);
    auto d2 = new_param("deconv2.weight", {cfg_.deconv_channels, cfg_.deconv_channels, 4, 4});
    he_fill(d2, cfg_.deconv_channels * 16);
    add_norm(cfg_.deconv_channels);

    // Zero-initialized head: training starts exactly at the reference map.
    add_conv("head", cfg_.k_bins, cfg_.deconv_channels, 1);
    auto head_w = find_param("head.weight");
    std::fill(head_w.val(), head_w.val() + head_w.numel(), S(0));
  }

  NetworkConfig cfg_;
  std::vector<ad::Tensor<S>> params_;
  std::deque<ad::BnState<S>> bn_states_;
  std::mt19937_64 rng_;
};

using DepthNetwork = DepthNetworkT<float>;

/// Copies one sample's image and full-resolution reference into the input
/// tensor (the reference channel is zeroed under the reference=off ablation)
/// and the downsampled reference into the skip buffer.
template <typename S>
void fill_sample(const NetworkConfig& cfg, typename DepthNetworkT<S>::Instance& inst, int b,
                 const GrayImage& image, const DepthMap& reference, const DepthMap& reference_ds) {
  const int H = cfg.input_height, W = cfg.input_width;
  const int oh = cfg.output_height(), ow = cfg.output_width();
  if (image.width != W || image.height != H || reference.width != W || reference.height != H)
    throw std::invalid_argument("fill_sample: raster does not match network input size");
  if (reference_ds.width != ow || reference_ds.height != oh)
    throw std::invalid_argument("fill_sample: downsampled reference size mismatch");
  S* in = inst.input.val();
  const int64_t plane = static_cast<int64_t>(H) * W;
  const int64_t base = static_cast<int64_t>(b) * cfg.in_channels() * plane;
  for (int64_t i = 0; i < plane; ++i) in[base + i] = static_cast<S>(image.values[i]);
  for (int64_t i = 0; i < plane; ++i)
    in[base + plane + i] = cfg.use_reference ? static_cast<S>(reference.values[i]) : S(0);
  const int64_t obase = static_cast<int64_t>(b) * oh * ow;
  for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i)
    inst.skip_map[obase + i] = static_cast<S>(reference_ds.values[i]);
}

/// Per-pixel center of the most probable bin (diagnostic decode); ties take
/// the lowest bin index.
template <typename S>
std::vector<S> argmax_decode(const ad::Tensor<S>& probs, const BinSpec& bins) {
  const int N = probs.dim(0), C = probs.dim(1);
  const int64_t plane = static_cast<int64_t>(probs.dim(2)) * probs.dim(3);
  if (C != bins.k) throw std::invalid_argument("argmax_decode: bin count mismatch");
  std::vector<S> out(static_cast<size_t>(N) * plane);
  const S* pv = probs.val();
  for (int n = 0; n < N; ++n)
    for (int64_t p = 0; p < plane; ++p) {
      const int64_t base = static_cast<int64_t>(n) * C * plane + p;
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (pv[base + c * plane] > pv[base + static_cast<int64_t>(best) * plane]) best = c;
      out[n * plane + p] = static_cast<S>(bins.centers[best]);
    }
  return out;
}

}  // namespace refdepth
