#pragma once

#include <cstdint>
#include <vector>

#include "refdepth/ad/graph.hpp"

namespace refdepth::testutil {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int n_checked = 0;
};

// Central finite differences against the analytic backward pass, run in
// double precision: forward the graph, backward once, then for sampled
// coordinates of each leaf tensor recompute the scalar loss at +/-eps.
// Relative error uses max(|analytic|, |fd|, floor) as the denominator.
GradCheckResult grad_check(ad::Graph<double>& graph, ad::Tensor<double>& loss,
                           const std::vector<ad::Tensor<double>>& leaves, int coords_per_leaf,
                           uint64_t seed, double eps = 1e-3, double denom_floor = 1e-3);

}  // namespace refdepth::testutil
