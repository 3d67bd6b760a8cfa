#pragma once

#include <cmath>
#include <vector>

#include "refdepth/ad/tensor.hpp"
#include "refdepth/error.hpp"

namespace refdepth::ad {

/// SGD with momentum: v <- momentum * v + grad; p <- p - lr * v.
template <typename S>
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Tensor<S>> params, S momentum)
      : params_(std::move(params)), momentum_(momentum) {
    for (const auto& p : params_)
      velocities_.emplace_back(p.numel(), S(0));
  }

  void step(S lr) {
    if (!(lr > S(0))) throw std::invalid_argument("sgd_step: lr must be positive");
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor<S>& p = params_[pi];
      const S* g = p.grad();
      S* v = velocities_[pi].data();
      S* val = p.val();
      for (int64_t i = 0; i < p.numel(); ++i) {
        if (!std::isfinite(static_cast<double>(g[i])))
          throw NumericError("sgd_step: non-finite gradient in parameter '" + p.name() + "'");
        v[i] = momentum_ * v[i] + g[i];
        val[i] -= lr * v[i];
      }
    }
  }

 private:
  std::vector<Tensor<S>> params_;
  std::vector<std::vector<S>> velocities_;
  S momentum_;
};

}  // namespace refdepth::ad
