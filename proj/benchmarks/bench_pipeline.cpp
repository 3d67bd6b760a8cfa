#include <benchmark/benchmark.h>

#include "refdepth/dataset.hpp"
#include "refdepth/metrics.hpp"
#include "refdepth/obstacle.hpp"
#include "refdepth/refmap.hpp"

using namespace refdepth;

namespace {

void BM_RaycastScene(benchmark::State& state) {
  const DatasetConfig cfg;
  const SceneSample s = make_sample(cfg, 1);
  for (auto _ : state) {
    const DepthMap depth = raycast_depth(s.scene, s.pose, cfg.intrinsics);
    benchmark::DoNotOptimize(depth.values[0]);
  }
}
BENCHMARK(BM_RaycastScene);

void BM_BuildReference(benchmark::State& state) {
  const DatasetConfig cfg;
  const SceneSample s = make_sample(cfg, 2);
  const GravityFrame gf = s.pose.gravity_frame();
  for (auto _ : state) {
    const ReferenceDepthMap ref = build_reference(s.scan, gf, cfg.intrinsics);
    benchmark::DoNotOptimize(ref.depth.values[0]);
  }
}
BENCHMARK(BM_BuildReference);

void BM_ComputeMetrics(benchmark::State& state) {
  const DatasetConfig cfg;
  const SceneSample s = make_sample(cfg, 3);
  DepthMap pred = s.gt_depth;
  for (auto& v : pred.values) v *= 1.01f;
  for (auto _ : state) {
    const MetricsReport r = compute_metrics(pred, s.gt_depth);
    benchmark::DoNotOptimize(r.rms);
  }
}
BENCHMARK(BM_ComputeMetrics);

void BM_ObstacleMap(benchmark::State& state) {
  const DatasetConfig cfg;
  const SceneSample s = make_sample(cfg, 4);
  const GravityFrame gf = s.pose.gravity_frame();
  for (auto _ : state) {
    const ObstacleMap map = obstacle_map(s.gt_depth, cfg.intrinsics, gf, 1.0, 64);
    benchmark::DoNotOptimize(map.nearest.data());
  }
}
BENCHMARK(BM_ObstacleMap);

}  // namespace

BENCHMARK_MAIN();
