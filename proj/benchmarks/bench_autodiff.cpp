#include <benchmark/benchmark.h>

#include <random>

#include "refdepth/ad/graph.hpp"
#include "refdepth/network.hpp"

using namespace refdepth;
using namespace refdepth::ad;

namespace {

Tensor<float> random_tensor(std::vector<int> dims, uint64_t seed) {
  Tensor<float> t = Tensor<float>::zeros(std::move(dims));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int64_t i = 0; i < t.numel(); ++i) t.val()[i] = n(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  Graph<float> g;
  auto x = random_tensor({16, 16, 24, 32}, 1);
  auto w = random_tensor({101, 16, 1, 1}, 2);
  auto b = Tensor<float>::zeros({101});
  auto y = g.conv2d(x, w, b, 1, 0);
  for (auto _ : state) {
    g.forward();
    benchmark::DoNotOptimize(y.val()[0]);
  }
}
BENCHMARK(BM_Conv2dForward);

void BM_SoftmaxChannels(benchmark::State& state) {
  Graph<float> g;
  auto x = random_tensor({16, 101, 24, 32}, 3);
  auto y = g.softmax_channels(x);
  for (auto _ : state) {
    g.forward();
    benchmark::DoNotOptimize(y.val()[0]);
  }
}
BENCHMARK(BM_SoftmaxChannels);

void BM_TrainStep(benchmark::State& state) {
  NetworkConfig cfg;
  DepthNetwork net(cfg);
  auto inst = net.build(16, true, 1.0f);
  inst->graph.training = true;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.2f, 8.0f);
  for (int64_t i = 0; i < inst->input.numel(); ++i) inst->input.val()[i] = u(rng);
  for (auto& v : inst->skip_map) v = u(rng);
  for (auto& v : inst->target_depth) v = u(rng);
  for (auto& m : inst->mask) m = 1;
  for (auto& t : inst->target_bins) t = 50;
  for (auto _ : state) {
    inst->graph.forward();
    inst->graph.backward(inst->loss);
    benchmark::DoNotOptimize(inst->loss.val()[0]);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
