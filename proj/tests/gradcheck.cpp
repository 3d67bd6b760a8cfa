#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace refdepth::testutil {

GradCheckResult grad_check(ad::Graph<double>& graph, ad::Tensor<double>& loss,
                           const std::vector<ad::Tensor<double>>& leaves, int coords_per_leaf,
                           uint64_t seed, double eps, double denom_floor) {
  graph.forward();
  graph.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves)
    analytic.emplace_back(leaf.grad(), leaf.grad() + leaf.numel());

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (size_t li = 0; li < leaves.size(); ++li) {
    ad::Tensor<double> leaf = leaves[li];
    std::vector<int64_t> coords;
    if (leaf.numel() <= coords_per_leaf) {
      coords.resize(leaf.numel());
      for (int64_t i = 0; i < leaf.numel(); ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<int64_t> pick(0, leaf.numel() - 1);
      for (int i = 0; i < coords_per_leaf; ++i) coords.push_back(pick(rng));
    }
    for (int64_t c : coords) {
      const double original = leaf.val()[c];
      leaf.val()[c] = original + eps;
      graph.forward();
      const double lp = loss.val()[0];
      leaf.val()[c] = original - eps;
      graph.forward();
      const double lm = loss.val()[0];
      leaf.val()[c] = original;
      const double fd = (lp - lm) / (2.0 * eps);
      const double a = analytic[li][c];
      const double denom = std::max({std::abs(a), std::abs(fd), denom_floor});
      result.max_rel_err = std::max(result.max_rel_err, std::abs(a - fd) / denom);
      ++result.n_checked;
    }
  }
  graph.forward();  // restore forward state
  return result;
}

}  // namespace refdepth::testutil
