#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "refdepth/ad/tensor.hpp"

namespace refdepth::ad {

/// Per-channel running statistics for batch normalization. Owned by the
/// network (they are checkpointed buffers, not trainable parameters).
template <typename S>
struct BnState {
  std::vector<S> running_mean;
  std::vector<S> running_var;
  S decay = S(0.99);

  explicit BnState(int channels = 0)
      : running_mean(channels, S(0)), running_var(channels, S(1)) {}
};

template <typename S>
class Graph;

template <typename S>
struct OpNode {
  virtual ~OpNode() = default;
  virtual void forward() = 0;
  virtual void backward() = 0;
  Graph<S>* graph = nullptr;
};

namespace detail {

inline int conv_out_size(int in, int kernel, int stride, int padding) {
  const int out = (in + 2 * padding - kernel) / stride + 1;
  if (out <= 0) throw std::invalid_argument("conv: output size would be empty");
  return out;
}

template <typename S>
void require_4d(const Tensor<S>& t, const char* what) {
  if (t.rank() != 4) throw std::invalid_argument(std::string(what) + ": expected a 4D tensor");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Op nodes. Forward values follow the standard definitions; backward
// accumulates exact analytic gradients. Reductions accumulate in double
// regardless of S.

template <typename S>
struct Conv2dOp final : OpNode<S> {
  Tensor<S> x, w, b, out;
  int stride, padding;

  Conv2dOp(Tensor<S> x_, Tensor<S> w_, Tensor<S> b_, int stride_, int padding_)
      : x(std::move(x_)), w(std::move(w_)), b(std::move(b_)), stride(stride_), padding(padding_) {
    detail::require_4d(x, "conv2d input");
    detail::require_4d(w, "conv2d weight");
    if (w.dim(1) != x.dim(1))
      throw std::invalid_argument("conv2d: weight in-channels != input channels");
    if (b.rank() != 1 || b.dim(0) != w.dim(0))
      throw std::invalid_argument("conv2d: bias shape must be (out_channels)");
    if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: bad stride/padding");
    const int oh = detail::conv_out_size(x.dim(2), w.dim(2), stride, padding);
    const int ow = detail::conv_out_size(x.dim(3), w.dim(3), stride, padding);
    out = Tensor<S>::zeros({x.dim(0), w.dim(0), oh, ow});
  }

  // Valid output-column range so that iw = ow*stride + iw0 stays in [0, W).
  static void ow_range(int iw0, int stride, int W, int Ow, int& lo, int& hi) {
    lo = iw0 < 0 ? (-iw0 + stride - 1) / stride : 0;
    hi = std::min(Ow - 1, (W - 1 - iw0) / stride);
  }

  void forward() override {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = out.dim(2), Ow = out.dim(3);
    const int64_t xplane = static_cast<int64_t>(H) * W;
    const int64_t oplane = static_cast<int64_t>(Oh) * Ow;
    const S* xv = x.val();
    const S* wv = w.val();
    S* ov = out.val();
    scratch_.resize(oplane);
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Co; ++co) {
        std::fill(scratch_.begin(), scratch_.end(), static_cast<double>(b.val()[co]));
        for (int ci = 0; ci < Ci; ++ci) {
          const S* xch = xv + (static_cast<int64_t>(n) * Ci + ci) * xplane;
          const S* wch = wv + (static_cast<int64_t>(co) * Ci + ci) * Kh * Kw;
          for (int kh = 0; kh < Kh; ++kh)
            for (int kw = 0; kw < Kw; ++kw) {
              const double wval = static_cast<double>(wch[kh * Kw + kw]);
              if (wval == 0.0) continue;
              const int iw0 = kw - padding;
              int ow_lo, ow_hi;
              ow_range(iw0, stride, W, Ow, ow_lo, ow_hi);
              for (int oh = 0; oh < Oh; ++oh) {
                const int ih = oh * stride - padding + kh;
                if (ih < 0 || ih >= H) continue;
                const S* xrow = xch + static_cast<int64_t>(ih) * W + iw0;
                double* srow = scratch_.data() + static_cast<int64_t>(oh) * Ow;
                for (int ow = ow_lo; ow <= ow_hi; ++ow)
                  srow[ow] += wval * static_cast<double>(xrow[ow * stride]);
              }
            }
        }
        S* och = ov + (static_cast<int64_t>(n) * Co + co) * oplane;
        for (int64_t i = 0; i < oplane; ++i) och[i] = static_cast<S>(scratch_[i]);
      }
  }

  void backward() override {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = out.dim(2), Ow = out.dim(3);
    const int64_t xplane = static_cast<int64_t>(H) * W;
    const int64_t oplane = static_cast<int64_t>(Oh) * Ow;
    const S* xv = x.val();
    const S* wv = w.val();
    const S* gout = out.grad();
    gx_.assign(x.numel(), 0.0);
    gw_.assign(w.numel(), 0.0);
    std::vector<double> gb(Co, 0.0);
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Co; ++co) {
        const S* gch = gout + (static_cast<int64_t>(n) * Co + co) * oplane;
        for (int64_t i = 0; i < oplane; ++i) gb[co] += static_cast<double>(gch[i]);
        for (int ci = 0; ci < Ci; ++ci) {
          const S* xch = xv + (static_cast<int64_t>(n) * Ci + ci) * xplane;
          double* gxch = gx_.data() + (static_cast<int64_t>(n) * Ci + ci) * xplane;
          const int64_t wbase = (static_cast<int64_t>(co) * Ci + ci) * Kh * Kw;
          for (int kh = 0; kh < Kh; ++kh)
            for (int kw = 0; kw < Kw; ++kw) {
              const double wval = static_cast<double>(wv[wbase + kh * Kw + kw]);
              const int iw0 = kw - padding;
              int ow_lo, ow_hi;
              ow_range(iw0, stride, W, Ow, ow_lo, ow_hi);
              double gw_acc = 0.0;
              for (int oh = 0; oh < Oh; ++oh) {
                const int ih = oh * stride - padding + kh;
                if (ih < 0 || ih >= H) continue;
                const S* xrow = xch + static_cast<int64_t>(ih) * W + iw0;
                double* gxrow = gxch + static_cast<int64_t>(ih) * W + iw0;
                const S* grow = gch + static_cast<int64_t>(oh) * Ow;
                for (int ow = ow_lo; ow <= ow_hi; ++ow) {
                  const double g = static_cast<double>(grow[ow]);
                  gw_acc += g * static_cast<double>(xrow[ow * stride]);
                  gxrow[ow * stride] += g * wval;
                }
              }
              gw_[wbase + kh * Kw + kw] += gw_acc;
            }
        }
      }
    S* xg = x.grad();
    S* wg = w.grad();
    S* bg = b.grad();
    for (int64_t i = 0; i < x.numel(); ++i) xg[i] += static_cast<S>(gx_[i]);
    for (int64_t i = 0; i < w.numel(); ++i) wg[i] += static_cast<S>(gw_[i]);
    for (int i = 0; i < Co; ++i) bg[i] += static_cast<S>(gb[i]);
  }

 private:
  std::vector<double> scratch_, gx_, gw_;
};

template <typename S>
struct ConvTranspose2dOp final : OpNode<S> {
  Tensor<S> x, w, out;  // weight layout (in_channels, out_channels, kh, kw)
  int stride, padding;

  ConvTranspose2dOp(Tensor<S> x_, Tensor<S> w_, int stride_, int padding_)
      : x(std::move(x_)), w(std::move(w_)), stride(stride_), padding(padding_) {
    detail::require_4d(x, "conv2d_transpose input");
    detail::require_4d(w, "conv2d_transpose weight");
    if (w.dim(0) != x.dim(1))
      throw std::invalid_argument("conv2d_transpose: weight in-channels != input channels");
    if (stride < 1 || padding < 0)
      throw std::invalid_argument("conv2d_transpose: bad stride/padding");
    const int oh = (x.dim(2) - 1) * stride - 2 * padding + w.dim(2);
    const int ow = (x.dim(3) - 1) * stride - 2 * padding + w.dim(3);
    if (oh <= 0 || ow <= 0)
      throw std::invalid_argument("conv2d_transpose: output size would be empty");
    out = Tensor<S>::zeros({x.dim(0), w.dim(1), oh, ow});
  }

  void forward() override {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = out.dim(2), Ow = out.dim(3);
    const S* xv = x.val();
    const S* wv = w.val();
    std::vector<double> acc(out.numel(), 0.0);
    for (int n = 0; n < N; ++n)
      for (int ci = 0; ci < Ci; ++ci)
        for (int h = 0; h < H; ++h)
          for (int iw = 0; iw < W; ++iw) {
            const double v = static_cast<double>(
                xv[((static_cast<int64_t>(n) * Ci + ci) * H + h) * W + iw]);
            if (v == 0.0) continue;
            for (int co = 0; co < Co; ++co)
              for (int kh = 0; kh < Kh; ++kh) {
                const int oh = h * stride - padding + kh;
                if (oh < 0 || oh >= Oh) continue;
                const int64_t obase = ((static_cast<int64_t>(n) * Co + co) * Oh + oh) * Ow;
                const int64_t wbase = ((static_cast<int64_t>(ci) * Co + co) * Kh + kh) * Kw;
                for (int kw = 0; kw < Kw; ++kw) {
                  const int ow = iw * stride - padding + kw;
                  if (ow < 0 || ow >= Ow) continue;
                  acc[obase + ow] += v * static_cast<double>(wv[wbase + kw]);
                }
              }
          }
    S* ov = out.val();
    for (int64_t i = 0; i < out.numel(); ++i) ov[i] = static_cast<S>(acc[i]);
  }

  void backward() override {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = out.dim(2), Ow = out.dim(3);
    const S* xv = x.val();
    const S* wv = w.val();
    const S* gout = out.grad();
    std::vector<double> gx(x.numel(), 0.0), gw(w.numel(), 0.0);
    for (int n = 0; n < N; ++n)
      for (int ci = 0; ci < Ci; ++ci)
        for (int h = 0; h < H; ++h)
          for (int iw = 0; iw < W; ++iw) {
            const int64_t xi = ((static_cast<int64_t>(n) * Ci + ci) * H + h) * W + iw;
            const double xval = static_cast<double>(xv[xi]);
            double gxi = 0.0;
            for (int co = 0; co < Co; ++co)
              for (int kh = 0; kh < Kh; ++kh) {
                const int oh = h * stride - padding + kh;
                if (oh < 0 || oh >= Oh) continue;
                const int64_t obase = ((static_cast<int64_t>(n) * Co + co) * Oh + oh) * Ow;
                const int64_t wbase = ((static_cast<int64_t>(ci) * Co + co) * Kh + kh) * Kw;
                for (int kw = 0; kw < Kw; ++kw) {
                  const int ow = iw * stride - padding + kw;
                  if (ow < 0 || ow >= Ow) continue;
                  const double g = static_cast<double>(gout[obase + ow]);
                  gxi += g * static_cast<double>(wv[wbase + kw]);
                  gw[wbase + kw] += g * xval;
                }
              }
            gx[xi] += gxi;
          }
    S* xg = x.grad();
    S* wg = w.grad();
    for (int64_t i = 0; i < x.numel(); ++i) xg[i] += static_cast<S>(gx[i]);
    for (int64_t i = 0; i < w.numel(); ++i) wg[i] += static_cast<S>(gw[i]);
  }
};

template <typename S>
struct BatchNormOp final : OpNode<S> {
  static constexpr double kEps = 1e-5;

  Tensor<S> x, gamma, beta, out;
  BnState<S>* state;
  std::vector<double> xhat;     // cached normalized input
  std::vector<double> inv_std;  // per channel

  BatchNormOp(Tensor<S> x_, Tensor<S> gamma_, Tensor<S> beta_, BnState<S>* state_)
      : x(std::move(x_)), gamma(std::move(gamma_)), beta(std::move(beta_)), state(state_) {
    detail::require_4d(x, "batch_norm input");
    const int C = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
      throw std::invalid_argument("batch_norm: gamma/beta shape must be (channels)");
    if (!state || static_cast<int>(state->running_mean.size()) != C)
      throw std::invalid_argument("batch_norm: running stats channel mismatch");
    out = Tensor<S>::zeros(x.dims());
    xhat.resize(x.numel());
    inv_std.resize(C);
  }

  void forward() override;
  void backward() override;
};

template <typename S>
struct ChannelAffineOp final : OpNode<S> {
  Tensor<S> x, gamma, beta, out;

  ChannelAffineOp(Tensor<S> x_, Tensor<S> gamma_, Tensor<S> beta_)
      : x(std::move(x_)), gamma(std::move(gamma_)), beta(std::move(beta_)) {
    detail::require_4d(x, "channel_affine input");
    const int C = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
      throw std::invalid_argument("channel_affine: gamma/beta shape must be (channels)");
    out = Tensor<S>::zeros(x.dims());
  }

  void forward() override {
    const int N = x.dim(0), C = x.dim(1);
    const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    const S* xv = x.val();
    S* ov = out.val();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        const S g = gamma.val()[c], b = beta.val()[c];
        for (int64_t i = 0; i < plane; ++i) ov[base + i] = g * xv[base + i] + b;
      }
  }

  void backward() override {
    const int N = x.dim(0), C = x.dim(1);
    const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    const S* xv = x.val();
    const S* go = out.grad();
    for (int c = 0; c < C; ++c) {
      double dg = 0.0, db = 0.0;
      const S g = gamma.val()[c];
      for (int n = 0; n < N; ++n) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const double gi = static_cast<double>(go[base + i]);
          dg += gi * static_cast<double>(xv[base + i]);
          db += gi;
          x.grad()[base + i] += static_cast<S>(gi * static_cast<double>(g));
        }
      }
      gamma.grad()[c] += static_cast<S>(dg);
      beta.grad()[c] += static_cast<S>(db);
    }
  }
};

template <typename S>
struct ReluOp final : OpNode<S> {
  Tensor<S> x, out;

  explicit ReluOp(Tensor<S> x_) : x(std::move(x_)) { out = Tensor<S>::zeros(x.dims()); }

  void forward() override {
    const S* xv = x.val();
    S* ov = out.val();
    for (int64_t i = 0; i < x.numel(); ++i) ov[i] = xv[i] > S(0) ? xv[i] : S(0);
  }

  void backward() override {
    const S* xv = x.val();
    const S* go = out.grad();
    S* xg = x.grad();
    for (int64_t i = 0; i < x.numel(); ++i)
      if (xv[i] > S(0)) xg[i] += go[i];
  }
};

template <typename S>
struct AddOp final : OpNode<S> {
  Tensor<S> a, b, out;

  AddOp(Tensor<S> a_, Tensor<S> b_) : a(std::move(a_)), b(std::move(b_)) {
    if (a.dims() != b.dims()) throw std::invalid_argument("add: shape mismatch");
    out = Tensor<S>::zeros(a.dims());
  }

  void forward() override {
    const S* av = a.val();
    const S* bv = b.val();
    S* ov = out.val();
    for (int64_t i = 0; i < a.numel(); ++i) ov[i] = av[i] + bv[i];
  }

  void backward() override {
    const S* go = out.grad();
    S* ag = a.grad();
    S* bg = b.grad();
    for (int64_t i = 0; i < a.numel(); ++i) {
      ag[i] += go[i];
      bg[i] += go[i];
    }
  }
};

/// Per-pixel softmax across the channel axis. Caches log of the partition
/// function so the NLL loss can evaluate through log-softmax.
template <typename S>
struct SoftmaxChannelsOp final : OpNode<S> {
  Tensor<S> x, out;
  std::vector<double> log_z;  // per (n, h, w)

  explicit SoftmaxChannelsOp(Tensor<S> x_) : x(std::move(x_)) {
    detail::require_4d(x, "softmax_channels input");
    out = Tensor<S>::zeros(x.dims());
    log_z.resize(static_cast<size_t>(x.dim(0)) * x.dim(2) * x.dim(3));
  }

  void forward() override {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t plane = static_cast<int64_t>(H) * W;
    const S* xv = x.val();
    S* ov = out.val();
    for (int n = 0; n < N; ++n)
      for (int64_t p = 0; p < plane; ++p) {
        const int64_t base = static_cast<int64_t>(n) * C * plane + p;
        double m = static_cast<double>(xv[base]);
        for (int c = 1; c < C; ++c)
          m = std::max(m, static_cast<double>(xv[base + c * plane]));
        double sum = 0.0;
        for (int c = 0; c < C; ++c)
          sum += std::exp(static_cast<double>(xv[base + c * plane]) - m);
        for (int c = 0; c < C; ++c)
          ov[base + c * plane] =
              static_cast<S>(std::exp(static_cast<double>(xv[base + c * plane]) - m) / sum);
        log_z[n * plane + p] = m + std::log(sum);
      }
  }

  void backward() override {
    const int N = x.dim(0), C = x.dim(1);
    const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    const S* pv = out.val();
    const S* go = out.grad();
    S* xg = x.grad();
    for (int n = 0; n < N; ++n)
      for (int64_t p = 0; p < plane; ++p) {
        const int64_t base = static_cast<int64_t>(n) * C * plane + p;
        double dot = 0.0;
        for (int c = 0; c < C; ++c)
          dot += static_cast<double>(go[base + c * plane]) *
                 static_cast<double>(pv[base + c * plane]);
        for (int c = 0; c < C; ++c) {
          const int64_t i = base + c * plane;
          xg[i] += static_cast<S>(static_cast<double>(pv[i]) *
                                  (static_cast<double>(go[i]) - dot));
        }
      }
  }
};

/// Expected value across channels with fixed per-channel centers:
/// out = sum_c p_c * center_c. Gradient flows into the probabilities.
template <typename S>
struct ChannelExpectationOp final : OpNode<S> {
  Tensor<S> probs, out;
  std::vector<S> centers;

  ChannelExpectationOp(Tensor<S> probs_, std::vector<S> centers_)
      : probs(std::move(probs_)), centers(std::move(centers_)) {
    detail::require_4d(probs, "channel_expectation input");
    if (static_cast<int>(centers.size()) != probs.dim(1))
      throw std::invalid_argument("channel_expectation: centers size != channels");
    out = Tensor<S>::zeros({probs.dim(0), 1, probs.dim(2), probs.dim(3)});
  }

  void forward() override {
    const int N = probs.dim(0), C = probs.dim(1);
    const int64_t plane = static_cast<int64_t>(probs.dim(2)) * probs.dim(3);
    const S* pv = probs.val();
    S* ov = out.val();
    for (int n = 0; n < N; ++n)
      for (int64_t p = 0; p < plane; ++p) {
        const int64_t base = static_cast<int64_t>(n) * C * plane + p;
        double acc = 0.0;
        for (int c = 0; c < C; ++c)
          acc += static_cast<double>(pv[base + c * plane]) * static_cast<double>(centers[c]);
        ov[n * plane + p] = static_cast<S>(acc);
      }
  }

  void backward() override {
    const int N = probs.dim(0), C = probs.dim(1);
    const int64_t plane = static_cast<int64_t>(probs.dim(2)) * probs.dim(3);
    const S* go = out.grad();
    S* pg = probs.grad();
    for (int n = 0; n < N; ++n)
      for (int64_t p = 0; p < plane; ++p) {
        const S g = go[n * plane + p];
        const int64_t base = static_cast<int64_t>(n) * C * plane + p;
        for (int c = 0; c < C; ++c) pg[base + c * plane] += centers[c] * g;
      }
  }
};

/// Adds a constant (non-differentiable) per-pixel map, e.g. the downsampled
/// reference depth entering through the global skip.
template <typename S>
struct AddConstMapOp final : OpNode<S> {
  Tensor<S> x, out;
  const std::vector<S>* map;

  AddConstMapOp(Tensor<S> x_, const std::vector<S>* map_) : x(std::move(x_)), map(map_) {
    if (!map) throw std::invalid_argument("add_const_map: null map");
    out = Tensor<S>::zeros(x.dims());
  }

  void forward() override {
    if (static_cast<int64_t>(map->size()) != x.numel())
      throw std::invalid_argument("add_const_map: map size mismatch");
    const S* xv = x.val();
    S* ov = out.val();
    for (int64_t i = 0; i < x.numel(); ++i) ov[i] = xv[i] + (*map)[i];
  }

  void backward() override {
    const S* go = out.grad();
    S* xg = x.grad();
    for (int64_t i = 0; i < x.numel(); ++i) xg[i] += go[i];
  }
};

template <typename S>
struct ClampOp final : OpNode<S> {
  Tensor<S> x, out;
  S lo, hi;

  ClampOp(Tensor<S> x_, S lo_, S hi_) : x(std::move(x_)), lo(lo_), hi(hi_) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
    out = Tensor<S>::zeros(x.dims());
  }

  void forward() override {
    const S* xv = x.val();
    S* ov = out.val();
    for (int64_t i = 0; i < x.numel(); ++i) ov[i] = std::clamp(xv[i], lo, hi);
  }

  void backward() override {
    const S* xv = x.val();
    const S* go = out.grad();
    S* xg = x.grad();
    for (int64_t i = 0; i < x.numel(); ++i)
      if (xv[i] > lo && xv[i] < hi) xg[i] += go[i];
  }
};

/// Mean negative log-likelihood of per-pixel channel targets over the valid
/// mask. The probabilities must come from softmax_channels: the loss reads
/// that op's logits and log partition function (fused log-softmax) and its
/// gradient bypasses the probabilities, accumulating (p - onehot)/M straight
/// into the logits.
template <typename S>
struct NllChannelLossOp final : OpNode<S> {
  const SoftmaxChannelsOp<S>* softmax;
  Tensor<S> probs, logits, out;
  const std::vector<int>* targets;
  const std::vector<uint8_t>* mask;
  int64_t n_valid = 0;

  NllChannelLossOp(const SoftmaxChannelsOp<S>* softmax_, const std::vector<int>* targets_,
                   const std::vector<uint8_t>* mask_)
      : softmax(softmax_), targets(targets_), mask(mask_) {
    if (!softmax)
      throw std::invalid_argument("nll_channel_loss: probabilities must come from softmax_channels");
    if (!targets || !mask) throw std::invalid_argument("nll_channel_loss: null targets/mask");
    probs = softmax->out;
    logits = softmax->x;
    out = Tensor<S>::zeros({1});
  }

  void forward() override {
    const int N = probs.dim(0), C = probs.dim(1);
    const int64_t plane = static_cast<int64_t>(probs.dim(2)) * probs.dim(3);
    const int64_t pixels = static_cast<int64_t>(N) * plane;
    if (static_cast<int64_t>(targets->size()) != pixels ||
        static_cast<int64_t>(mask->size()) != pixels)
      throw std::invalid_argument("nll_channel_loss: target/mask size mismatch");
    const S* zv = logits.val();
    double acc = 0.0;
    n_valid = 0;
    for (int64_t i = 0; i < pixels; ++i) {
      if (!(*mask)[i]) continue;
      const int t = (*targets)[i];
      if (t < 0 || t >= C) throw std::invalid_argument("nll_channel_loss: target bin out of range");
      const int64_t n = i / plane, p = i % plane;
      acc += softmax->log_z[i] -
             static_cast<double>(zv[(n * C + t) * plane + p]);
      ++n_valid;
    }
    if (n_valid == 0) throw std::invalid_argument("nll_channel_loss: empty mask");
    out.val()[0] = static_cast<S>(acc / static_cast<double>(n_valid));
  }

  void backward() override {
    const int C = probs.dim(1);
    const int64_t plane = static_cast<int64_t>(probs.dim(2)) * probs.dim(3);
    const int64_t pixels = static_cast<int64_t>(probs.dim(0)) * plane;
    const double scale = static_cast<double>(out.grad()[0]) / static_cast<double>(n_valid);
    const S* pv = probs.val();
    S* zg = logits.grad();
    for (int64_t i = 0; i < pixels; ++i) {
      if (!(*mask)[i]) continue;
      const int t = (*targets)[i];
      const int64_t n = i / plane, p = i % plane;
      for (int c = 0; c < C; ++c) {
        const int64_t j = (n * C + c) * plane + p;
        const double delta = (c == t) ? 1.0 : 0.0;
        zg[j] += static_cast<S>((static_cast<double>(pv[j]) - delta) * scale);
      }
    }
  }
};

/// Mean absolute error over the valid mask; the subgradient at zero is zero.
template <typename S>
struct L1MaskedLossOp final : OpNode<S> {
  Tensor<S> pred, out;
  const std::vector<S>* target;
  const std::vector<uint8_t>* mask;
  int64_t n_valid = 0;

  L1MaskedLossOp(Tensor<S> pred_, const std::vector<S>* target_, const std::vector<uint8_t>* mask_)
      : pred(std::move(pred_)), target(target_), mask(mask_) {
    if (!target || !mask) throw std::invalid_argument("l1_loss: null target/mask");
    out = Tensor<S>::zeros({1});
  }

  void forward() override {
    const int64_t n = pred.numel();
    if (static_cast<int64_t>(target->size()) != n || static_cast<int64_t>(mask->size()) != n)
      throw std::invalid_argument("l1_loss: target/mask size mismatch");
    const S* pv = pred.val();
    double acc = 0.0;
    n_valid = 0;
    for (int64_t i = 0; i < n; ++i) {
      if (!(*mask)[i]) continue;
      acc += std::abs(static_cast<double>(pv[i]) - static_cast<double>((*target)[i]));
      ++n_valid;
    }
    if (n_valid == 0) throw std::invalid_argument("l1_loss: empty mask");
    out.val()[0] = static_cast<S>(acc / static_cast<double>(n_valid));
  }

  void backward() override {
    const int64_t n = pred.numel();
    const double scale = static_cast<double>(out.grad()[0]) / static_cast<double>(n_valid);
    const S* pv = pred.val();
    S* pg = pred.grad();
    for (int64_t i = 0; i < n; ++i) {
      if (!(*mask)[i]) continue;
      const double d = static_cast<double>(pv[i]) - static_cast<double>((*target)[i]);
      if (d > 0.0) pg[i] += static_cast<S>(scale);
      else if (d < 0.0) pg[i] -= static_cast<S>(scale);
    }
  }
};

/// out = a + alpha * b for scalar tensors; the combined training objective.
template <typename S>
struct AffineCombineOp final : OpNode<S> {
  Tensor<S> a, b, out;
  S alpha;

  AffineCombineOp(Tensor<S> a_, Tensor<S> b_, S alpha_)
      : a(std::move(a_)), b(std::move(b_)), alpha(alpha_) {
    if (a.numel() != 1 || b.numel() != 1)
      throw std::invalid_argument("affine_combine: scalar tensors required");
    out = Tensor<S>::zeros({1});
  }

  void forward() override { out.val()[0] = a.val()[0] + alpha * b.val()[0]; }

  void backward() override {
    a.grad()[0] += out.grad()[0];
    b.grad()[0] += alpha * out.grad()[0];
  }
};

/// Scalar projection sum_i x_i * w_i; gradient-check harness for non-scalar
/// outputs.
template <typename S>
struct WeightedSumOp final : OpNode<S> {
  Tensor<S> x, out;
  const std::vector<S>* weights;

  WeightedSumOp(Tensor<S> x_, const std::vector<S>* weights_) : x(std::move(x_)), weights(weights_) {
    if (!weights) throw std::invalid_argument("weighted_sum: null weights");
    out = Tensor<S>::zeros({1});
  }

  void forward() override {
    if (static_cast<int64_t>(weights->size()) != x.numel())
      throw std::invalid_argument("weighted_sum: weights size mismatch");
    const S* xv = x.val();
    double acc = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i)
      acc += static_cast<double>(xv[i]) * static_cast<double>((*weights)[i]);
    out.val()[0] = static_cast<S>(acc);
  }

  void backward() override {
    const S g = out.grad()[0];
    S* xg = x.grad();
    for (int64_t i = 0; i < x.numel(); ++i) xg[i] += (*weights)[i] * g;
  }
};

// ---------------------------------------------------------------------------

/// Static computation graph: ops are appended in construction order (which
/// is a topological order by construction), forward() re-runs the whole
/// graph in place, backward() seeds a scalar loss with gradient one and
/// sweeps the ops exactly once in reverse. Rebuilding inputs and calling
/// forward() again is the supported way to reuse a graph across batches and
/// finite-difference probes.
template <typename S>
class Graph {
 public:
  bool training = false;         // batch-norm statistics mode
  bool update_bn_stats = false;  // fold batch stats into running averages

  Tensor<S> conv2d(Tensor<S> x, Tensor<S> w, Tensor<S> b, int stride, int padding) {
    return add_node<Conv2dOp<S>>(std::move(x), std::move(w), std::move(b), stride, padding);
  }
  Tensor<S> conv2d_transpose(Tensor<S> x, Tensor<S> w, int stride, int padding) {
    return add_node<ConvTranspose2dOp<S>>(std::move(x), std::move(w), stride, padding);
  }
  Tensor<S> batch_norm(Tensor<S> x, Tensor<S> gamma, Tensor<S> beta, BnState<S>* state) {
    return add_node<BatchNormOp<S>>(std::move(x), std::move(gamma), std::move(beta), state);
  }
  Tensor<S> channel_affine(Tensor<S> x, Tensor<S> gamma, Tensor<S> beta) {
    return add_node<ChannelAffineOp<S>>(std::move(x), std::move(gamma), std::move(beta));
  }
  Tensor<S> relu(Tensor<S> x) { return add_node<ReluOp<S>>(std::move(x)); }
  Tensor<S> add(Tensor<S> a, Tensor<S> b) {
    return add_node<AddOp<S>>(std::move(a), std::move(b));
  }
  Tensor<S> softmax_channels(Tensor<S> x) {
    return add_node<SoftmaxChannelsOp<S>>(std::move(x));
  }
  Tensor<S> channel_expectation(Tensor<S> probs, std::vector<S> centers) {
    return add_node<ChannelExpectationOp<S>>(std::move(probs), std::move(centers));
  }
  Tensor<S> add_const_map(Tensor<S> x, const std::vector<S>* map) {
    return add_node<AddConstMapOp<S>>(std::move(x), map);
  }
  Tensor<S> clamp(Tensor<S> x, S lo, S hi) {
    return add_node<ClampOp<S>>(std::move(x), lo, hi);
  }
  Tensor<S> nll_channel_loss(const Tensor<S>& probs, const std::vector<int>* targets,
                             const std::vector<uint8_t>* mask) {
    auto* producer = dynamic_cast<SoftmaxChannelsOp<S>*>(producer_of(probs));
    if (!producer)
      throw std::invalid_argument("nll_channel_loss: probabilities must come from softmax_channels");
    return add_node<NllChannelLossOp<S>>(producer, targets, mask);
  }
  Tensor<S> l1_loss(Tensor<S> pred, const std::vector<S>* target,
                    const std::vector<uint8_t>* mask) {
    return add_node<L1MaskedLossOp<S>>(std::move(pred), target, mask);
  }
  Tensor<S> affine_combine(Tensor<S> a, Tensor<S> b, S alpha) {
    return add_node<AffineCombineOp<S>>(std::move(a), std::move(b), alpha);
  }
  Tensor<S> weighted_sum(Tensor<S> x, const std::vector<S>* weights) {
    return add_node<WeightedSumOp<S>>(std::move(x), weights);
  }

  void forward() {
    for (auto& node : nodes_) node->forward();
  }

  void zero_grads() {
    for (auto& t : tracked_) std::fill(t.grad_vec().begin(), t.grad_vec().end(), S(0));
  }

  /// Zeroes every tracked gradient, seeds d(loss)/d(loss) = 1 and sweeps the
  /// ops once in reverse topological order.
  void backward(Tensor<S>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    zero_grads();
    loss.grad()[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
  }

  const std::vector<Tensor<S>>& tracked_tensors() const { return tracked_; }

 private:
  template <typename Node, typename... Args>
  Tensor<S> add_node(Args&&... args) {
    auto node = std::make_unique<Node>(std::forward<Args>(args)...);
    node->graph = this;
    Tensor<S> out = node->out;
    track_inputs(*node);
    track(out);
    producers_[out.val()] = node.get();
    nodes_.push_back(std::move(node));
    return out;
  }

  void track(const Tensor<S>& t) {
    if (!t.defined()) return;
    if (seen_.insert(t.val()).second) tracked_.push_back(t);
  }

  OpNode<S>* producer_of(const Tensor<S>& t) {
    const auto it = producers_.find(t.val());
    return it == producers_.end() ? nullptr : it->second;
  }

  template <typename Node>
  void track_inputs(Node& node) {
    if constexpr (requires { node.x; }) track(node.x);
    if constexpr (requires { node.w; }) track(node.w);
    if constexpr (requires { node.b; }) track(node.b);
    if constexpr (requires { node.a; }) track(node.a);
    if constexpr (requires { node.gamma; }) track(node.gamma);
    if constexpr (requires { node.beta; }) track(node.beta);
    if constexpr (requires { node.probs; }) track(node.probs);
    if constexpr (requires { node.logits; }) track(node.logits);
    if constexpr (requires { node.pred; }) track(node.pred);
  }

  std::vector<std::unique_ptr<OpNode<S>>> nodes_;
  std::vector<Tensor<S>> tracked_;
  std::unordered_set<const S*> seen_;
  std::unordered_map<const S*, OpNode<S>*> producers_;
};

// Batch normalization: batch statistics when graph->training, running
// averages otherwise. Running stats are folded in only when the graph's
// update flag is set, so repeated forward passes (finite differences,
// evaluation) are side-effect free.
template <typename S>
void BatchNormOp<S>::forward() {
  const int N = x.dim(0), C = x.dim(1);
  const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  const int64_t m = static_cast<int64_t>(N) * plane;
  const S* xv = x.val();
  S* ov = out.val();
  const bool training = this->graph && this->graph->training;
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < N; ++n) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) sum += static_cast<double>(xv[base + i]);
      }
      mean = sum / static_cast<double>(m);
      double sq = 0.0;
      for (int n = 0; n < N; ++n) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const double d = static_cast<double>(xv[base + i]) - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);
      if (this->graph->update_bn_stats) {
        const double unbiased = (m > 1) ? var * static_cast<double>(m) / (m - 1) : var;
        const double decay = static_cast<double>(state->decay);
        state->running_mean[c] =
            static_cast<S>(decay * static_cast<double>(state->running_mean[c]) + (1.0 - decay) * mean);
        state->running_var[c] =
            static_cast<S>(decay * static_cast<double>(state->running_var[c]) + (1.0 - decay) * unbiased);
      }
    } else {
      mean = static_cast<double>(state->running_mean[c]);
      var = static_cast<double>(state->running_var[c]);
    }
    const double istd = 1.0 / std::sqrt(var + kEps);
    inv_std[c] = istd;
    const double g = static_cast<double>(gamma.val()[c]);
    const double b = static_cast<double>(beta.val()[c]);
    for (int n = 0; n < N; ++n) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double xh = (static_cast<double>(xv[base + i]) - mean) * istd;
        xhat[base + i] = xh;
        ov[base + i] = static_cast<S>(g * xh + b);
      }
    }
  }
}

template <typename S>
void BatchNormOp<S>::backward() {
  const int N = x.dim(0), C = x.dim(1);
  const int64_t plane = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  const int64_t m = static_cast<int64_t>(N) * plane;
  const S* go = out.grad();
  S* xg = x.grad();
  const bool training = this->graph && this->graph->training;
  for (int c = 0; c < C; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < N; ++n) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double gi = static_cast<double>(go[base + i]);
        sum_g += gi;
        sum_gx += gi * xhat[base + i];
      }
    }
    gamma.grad()[c] += static_cast<S>(sum_gx);
    beta.grad()[c] += static_cast<S>(sum_g);
    const double scale = static_cast<double>(gamma.val()[c]) * inv_std[c];
    if (training) {
      const double mean_g = sum_g / static_cast<double>(m);
      const double mean_gx = sum_gx / static_cast<double>(m);
      for (int n = 0; n < N; ++n) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const double gi = static_cast<double>(go[base + i]);
          xg[base + i] += static_cast<S>(scale * (gi - mean_g - xhat[base + i] * mean_gx));
        }
      }
    } else {
      for (int n = 0; n < N; ++n) {
        const int64_t base = (static_cast<int64_t>(n) * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i)
          xg[base + i] += static_cast<S>(scale * static_cast<double>(go[base + i]));
      }
    }
  }
}

}  // namespace refdepth::ad
