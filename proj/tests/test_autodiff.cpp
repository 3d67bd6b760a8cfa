#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "gradcheck.hpp"
#include "refdepth/ad/checkpoint.hpp"
#include "refdepth/ad/graph.hpp"
#include "refdepth/ad/sgd.hpp"
#include "refdepth/error.hpp"

using namespace refdepth;
using namespace refdepth::ad;
using refdepth::testutil::grad_check;

namespace {

template <typename S>
Tensor<S> random_tensor(std::vector<int> dims, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<S> t = Tensor<S>::zeros(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (int64_t i = 0; i < t.numel(); ++i) t.val()[i] = static_cast<S>(u(rng));
  return t;
}

std::vector<double> random_weights(int64_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& v : w) v = g(rng);
  return w;
}

constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Autodiff, ReluValuesAndGradients) {
  Graph<float> g;
  Tensor<float> x = Tensor<float>::zeros({1, 1, 1, 3});
  x.val()[0] = -1.0f;
  x.val()[1] = 2.0f;
  x.val()[2] = 0.0f;
  Tensor<float> y = g.relu(x);
  std::vector<float> w = {1.0f, 1.0f, 1.0f};
  std::vector<float> wf(w.begin(), w.end());
  Tensor<float> loss = g.weighted_sum(y, &wf);
  g.forward();
  EXPECT_EQ(y.val()[0], 0.0f);
  EXPECT_EQ(y.val()[1], 2.0f);
  EXPECT_EQ(y.val()[2], 0.0f);
  g.backward(loss);
  EXPECT_EQ(x.grad()[0], 0.0f);
  EXPECT_EQ(x.grad()[1], 1.0f);
  EXPECT_EQ(x.grad()[2], 0.0f);  // subgradient at 0
}

TEST(Autodiff, ReluIsNotAdditive) {
  // relu(a + b) != relu(a) + relu(b): a = 1, b = -2.
  const auto relu = [](double v) { return std::max(0.0, v); };
  EXPECT_NE(relu(1.0 + -2.0), relu(1.0) + relu(-2.0));
  EXPECT_EQ(relu(1.0 + -2.0), 0.0);
  EXPECT_EQ(relu(1.0) + relu(-2.0), 1.0);
}

TEST(Autodiff, ConvIdentityKernel) {
  std::mt19937_64 rng(2);
  Graph<float> g;
  Tensor<float> x = random_tensor<float>({2, 1, 4, 5}, rng);
  Tensor<float> w = Tensor<float>::zeros({1, 1, 1, 1});
  w.val()[0] = 1.0f;
  Tensor<float> b = Tensor<float>::zeros({1});
  Tensor<float> y = g.conv2d(x, w, b, 1, 0);
  g.forward();
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.val()[i], x.val()[i]);
}

TEST(Autodiff, ConvShapeMismatchRejected) {
  Graph<float> g;
  Tensor<float> x = Tensor<float>::zeros({1, 3, 4, 4});
  Tensor<float> w = Tensor<float>::zeros({2, 4, 3, 3});  // in-channels disagree
  Tensor<float> b = Tensor<float>::zeros({2});
  EXPECT_THROW(g.conv2d(x, w, b, 1, 1), std::invalid_argument);
  Tensor<float> w2 = Tensor<float>::zeros({2, 3, 3, 3});
  Tensor<float> bad_bias = Tensor<float>::zeros({3});
  EXPECT_THROW(g.conv2d(x, w2, bad_bias, 1, 1), std::invalid_argument);
  Tensor<float> a = Tensor<float>::zeros({1, 1, 2, 2});
  Tensor<float> c = Tensor<float>::zeros({1, 1, 2, 3});
  EXPECT_THROW(g.add(a, c), std::invalid_argument);
}

TEST(Autodiff, SoftmaxUniformOnZeros) {
  const int k = 101;
  Graph<float> g;
  Tensor<float> x = Tensor<float>::zeros({1, k, 2, 2});
  Tensor<float> p = g.softmax_channels(x);
  g.forward();
  for (int64_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(p.val()[i], 1.0f / k, 1e-9);
}

TEST(Autodiff, SoftmaxNormalizedAndPositive) {
  std::mt19937_64 rng(3);
  Graph<float> g;
  Tensor<float> x = random_tensor<float>({2, 7, 3, 4}, rng, -30.0, 30.0);
  Tensor<float> p = g.softmax_channels(x);
  g.forward();
  const int C = 7;
  const int64_t plane = 12;
  for (int n = 0; n < 2; ++n)
    for (int64_t px = 0; px < plane; ++px) {
      double sum = 0.0;
      for (int c = 0; c < C; ++c) {
        const float v = p.val()[(n * C + c) * plane + px];
        EXPECT_GT(v, 0.0f);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

// --- finite-difference checks, double precision -----------------------------

TEST(Autodiff, GradConv2d) {
  std::mt19937_64 rng(11);
  for (const auto& [stride, padding] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
    Graph<double> g;
    Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
    Tensor<double> w = random_tensor<double>({2, 3, 3, 3}, rng);
    Tensor<double> b = random_tensor<double>({2}, rng);
    Tensor<double> y = g.conv2d(x, w, b, stride, padding);
    const auto weights = random_weights(y.numel(), 5);
    Tensor<double> loss = g.weighted_sum(y, &weights);
    const auto res = grad_check(g, loss, {x, w, b}, 40, 99);
    EXPECT_LT(res.max_rel_err, kGradTol) << "stride " << stride << " pad " << padding;
  }
}

TEST(Autodiff, GradConvTranspose2d) {
  std::mt19937_64 rng(13);
  for (const auto& [stride, padding] : {std::pair{1, 0}, {2, 1}}) {
    Graph<double> g;
    Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
    Tensor<double> w = random_tensor<double>({3, 2, 4, 4}, rng);
    Tensor<double> y = g.conv2d_transpose(x, w, stride, padding);
    const auto weights = random_weights(y.numel(), 6);
    Tensor<double> loss = g.weighted_sum(y, &weights);
    const auto res = grad_check(g, loss, {x, w}, 40, 101);
    EXPECT_LT(res.max_rel_err, kGradTol);
  }
}

TEST(Autodiff, GradBatchNormTraining) {
  std::mt19937_64 rng(17);
  Graph<double> g;
  g.training = true;
  Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
  Tensor<double> gamma = random_tensor<double>({3}, rng, 0.5, 1.5);
  Tensor<double> beta = random_tensor<double>({3}, rng);
  BnState<double> state(3);
  Tensor<double> y = g.batch_norm(x, gamma, beta, &state);
  const auto weights = random_weights(y.numel(), 7);
  Tensor<double> loss = g.weighted_sum(y, &weights);
  const auto res = grad_check(g, loss, {x, gamma, beta}, 50, 103);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, GradBatchNormEval) {
  std::mt19937_64 rng(19);
  Graph<double> g;
  g.training = false;
  Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
  Tensor<double> gamma = random_tensor<double>({3}, rng, 0.5, 1.5);
  Tensor<double> beta = random_tensor<double>({3}, rng);
  BnState<double> state(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (auto& v : state.running_mean) v = u(rng) - 1.0;
  for (auto& v : state.running_var) v = u(rng);
  Tensor<double> y = g.batch_norm(x, gamma, beta, &state);
  const auto weights = random_weights(y.numel(), 8);
  Tensor<double> loss = g.weighted_sum(y, &weights);
  const auto res = grad_check(g, loss, {x, gamma, beta}, 50, 105);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, BatchNormRunningStatsUpdateOnlyWhenRequested) {
  std::mt19937_64 rng(23);
  Graph<double> g;
  g.training = true;
  Tensor<double> x = random_tensor<double>({4, 2, 3, 3}, rng, 1.0, 3.0);
  Tensor<double> gamma = Tensor<double>::zeros({2});
  gamma.val()[0] = gamma.val()[1] = 1.0;
  Tensor<double> beta = Tensor<double>::zeros({2});
  BnState<double> state(2);
  g.batch_norm(x, gamma, beta, &state);

  g.update_bn_stats = false;
  g.forward();
  EXPECT_EQ(state.running_mean[0], 0.0);
  EXPECT_EQ(state.running_var[0], 1.0);

  g.update_bn_stats = true;
  g.forward();
  EXPECT_NE(state.running_mean[0], 0.0);
  // decay 0.99 folding in a batch mean of roughly 2
  EXPECT_NEAR(state.running_mean[0], 0.01 * 2.0, 0.01);
}

TEST(Autodiff, GradChannelAffine) {
  std::mt19937_64 rng(29);
  Graph<double> g;
  Tensor<double> x = random_tensor<double>({2, 3, 4, 4}, rng);
  Tensor<double> gamma = random_tensor<double>({3}, rng, 0.5, 1.5);
  Tensor<double> beta = random_tensor<double>({3}, rng);
  Tensor<double> y = g.channel_affine(x, gamma, beta);
  const auto weights = random_weights(y.numel(), 9);
  Tensor<double> loss = g.weighted_sum(y, &weights);
  const auto res = grad_check(g, loss, {x, gamma, beta}, 50, 107);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, GradReluAddSoftmaxExpectationClamp) {
  std::mt19937_64 rng(31);
  Graph<double> g;
  Tensor<double> x = random_tensor<double>({2, 5, 3, 3}, rng, -2.0, 2.0);
  Tensor<double> y = random_tensor<double>({2, 5, 3, 3}, rng, -2.0, 2.0);
  Tensor<double> sum = g.add(g.relu(x), y);
  Tensor<double> probs = g.softmax_channels(sum);
  std::vector<double> centers = {-2.0, -1.0, 0.0, 1.0, 2.0};
  Tensor<double> expect = g.channel_expectation(probs, centers);
  Tensor<double> clamped = g.clamp(expect, -1.5, 1.5);
  const auto weights = random_weights(clamped.numel(), 10);
  Tensor<double> loss = g.weighted_sum(clamped, &weights);
  const auto res = grad_check(g, loss, {x, y}, 60, 109);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, GradNllThroughSoftmax) {
  std::mt19937_64 rng(37);
  Graph<double> g;
  Tensor<double> z = random_tensor<double>({2, 6, 3, 3}, rng, -3.0, 3.0);
  Tensor<double> probs = g.softmax_channels(z);
  std::vector<int> targets(2 * 9);
  std::vector<uint8_t> mask(2 * 9, 1);
  std::uniform_int_distribution<int> pick(0, 5);
  for (auto& t : targets) t = pick(rng);
  mask[3] = 0;
  mask[11] = 0;
  Tensor<double> loss = g.nll_channel_loss(probs, &targets, &mask);
  const auto res = grad_check(g, loss, {z}, 80, 111);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, GradNllPlusExpectationSharedProbs) {
  // Both consumers of the probabilities: fused NLL into the logits plus the
  // expectation path through the softmax backward.
  std::mt19937_64 rng(41);
  Graph<double> g;
  Tensor<double> z = random_tensor<double>({1, 5, 2, 2}, rng, -2.0, 2.0);
  Tensor<double> probs = g.softmax_channels(z);
  std::vector<int> targets(4, 2);
  std::vector<uint8_t> mask(4, 1);
  Tensor<double> nll = g.nll_channel_loss(probs, &targets, &mask);
  std::vector<double> centers = {-1.0, -0.5, 0.0, 0.5, 1.0};
  Tensor<double> expect = g.channel_expectation(probs, centers);
  std::vector<double> target_map = {0.3, -0.2, 0.15, 0.4};
  Tensor<double> l1 = g.l1_loss(expect, &target_map, &mask);
  Tensor<double> loss = g.affine_combine(nll, l1, 0.7);
  const auto res = grad_check(g, loss, {z}, 20, 113);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

TEST(Autodiff, GradL1AndAddConstMap) {
  std::mt19937_64 rng(43);
  Graph<double> g;
  Tensor<double> x = random_tensor<double>({1, 1, 4, 4}, rng, -1.0, 1.0);
  std::vector<double> offset(16, 0.25);
  Tensor<double> shifted = g.add_const_map(x, &offset);
  std::vector<double> target(16);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& t : target) t = u(rng);
  std::vector<uint8_t> mask(16, 1);
  mask[5] = 0;
  Tensor<double> loss = g.l1_loss(shifted, &target, &mask);
  const auto res = grad_check(g, loss, {x}, 16, 115);
  EXPECT_LT(res.max_rel_err, kGradTol);
}

// --- loss semantics ---------------------------------------------------------

TEST(Autodiff, NllOneHotCorrectIsZero) {
  Graph<float> g;
  Tensor<float> z = Tensor<float>::zeros({1, 3, 1, 2});
  // strongly peaked logits at the target bin
  z.val()[0 * 2 + 0] = 100.0f;  // channel 0, pixel 0
  z.val()[1 * 2 + 1] = 100.0f;  // channel 1, pixel 1
  Tensor<float> probs = g.softmax_channels(z);
  std::vector<int> targets = {0, 1};
  std::vector<uint8_t> mask = {1, 1};
  Tensor<float> loss = g.nll_channel_loss(probs, &targets, &mask);
  g.forward();
  EXPECT_NEAR(loss.val()[0], 0.0f, 1e-6);
}

TEST(Autodiff, NllUniformIsLogK) {
  const int k = 101;
  Graph<float> g;
  Tensor<float> z = Tensor<float>::zeros({1, k, 2, 2});
  Tensor<float> probs = g.softmax_channels(z);
  std::vector<int> targets(4, 17);
  std::vector<uint8_t> mask(4, 1);
  Tensor<float> loss = g.nll_channel_loss(probs, &targets, &mask);
  g.forward();
  EXPECT_NEAR(loss.val()[0], std::log(101.0), 1e-6);  // ~4.6151
}

TEST(Autodiff, NllMaskRestrictsMean) {
  Graph<float> g;
  Tensor<float> z = Tensor<float>::zeros({1, 2, 1, 4});
  // pixel i logit gap grows with i, target always channel 0
  for (int i = 0; i < 4; ++i) z.val()[4 + i] = static_cast<float>(i);  // channel 1
  Tensor<float> probs = g.softmax_channels(z);
  std::vector<int> targets(4, 0);
  std::vector<uint8_t> all(4, 1), half = {1, 1, 0, 0};
  Tensor<float> loss_all = g.nll_channel_loss(probs, &targets, &all);
  Tensor<float> loss_half = g.nll_channel_loss(probs, &targets, &half);
  g.forward();
  const double l0 = std::log(1.0 + std::exp(0.0));
  const double l1 = std::log(1.0 + std::exp(1.0));
  EXPECT_NEAR(loss_half.val()[0], (l0 + l1) / 2.0, 1e-6);
  EXPECT_GT(loss_all.val()[0], loss_half.val()[0]);
}

TEST(Autodiff, NllEmptyMaskThrows) {
  Graph<float> g;
  Tensor<float> z = Tensor<float>::zeros({1, 3, 1, 1});
  Tensor<float> probs = g.softmax_channels(z);
  std::vector<int> targets = {0};
  std::vector<uint8_t> mask = {0};
  Tensor<float> loss = g.nll_channel_loss(probs, &targets, &mask);
  EXPECT_THROW(g.forward(), std::invalid_argument);
}

TEST(Autodiff, NllRequiresSoftmaxProbs) {
  Graph<float> g;
  Tensor<float> z = Tensor<float>::zeros({1, 3, 1, 1});
  Tensor<float> notprobs = g.relu(z);
  std::vector<int> targets = {0};
  std::vector<uint8_t> mask = {1};
  EXPECT_THROW(g.nll_channel_loss(notprobs, &targets, &mask), std::invalid_argument);
}

TEST(Autodiff, L1LossSemantics) {
  Graph<float> g;
  Tensor<float> pred = Tensor<float>::zeros({1, 1, 2, 2});
  pred.val()[0] = 1.0f;
  pred.val()[1] = 2.0f;
  pred.val()[2] = 3.0f;
  pred.val()[3] = 4.0f;
  std::vector<float> target = {1.0f, 2.0f, 3.0f, 4.0f};
  std::vector<uint8_t> mask(4, 1);
  Tensor<float> loss = g.l1_loss(pred, &target, &mask);
  g.forward();
  EXPECT_EQ(loss.val()[0], 0.0f);

  // constant offset: loss c, per-pixel gradient magnitude 1/N
  for (int i = 0; i < 4; ++i) pred.val()[i] += (i % 2 ? 0.5f : -0.5f);
  g.forward();
  EXPECT_NEAR(loss.val()[0], 0.5f, 1e-7);
  g.backward(loss);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(pred.grad()[i]), 0.25f, 1e-7);
}

TEST(Autodiff, L1MatchesDirectSummationOracle) {
  std::mt19937_64 rng(47);
  Graph<double> g;
  Tensor<double> pred = random_tensor<double>({1, 1, 8, 8}, rng, -5.0, 5.0);
  std::vector<double> target(64);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (auto& t : target) t = u(rng);
  std::vector<uint8_t> mask(64, 1);
  for (int i = 0; i < 64; i += 7) mask[i] = 0;
  Tensor<double> loss = g.l1_loss(pred, &target, &mask);
  g.forward();
  double acc = 0.0;
  int n = 0;
  for (int i = 0; i < 64; ++i) {
    if (!mask[i]) continue;
    acc += std::abs(pred.val()[i] - target[i]);
    ++n;
  }
  EXPECT_NEAR(loss.val()[0], acc / n, 1e-6);
}

TEST(Autodiff, SgdBasicStep) {
  Tensor<float> p = Tensor<float>::zeros({3}, "p");
  p.val()[0] = 1.0f;
  p.val()[1] = 2.0f;
  p.val()[2] = 3.0f;
  p.grad()[0] = 0.5f;
  p.grad()[1] = -1.0f;
  p.grad()[2] = 0.0f;
  SgdOptimizer<float> opt({p}, 0.0f);
  opt.step(1.0f);
  EXPECT_EQ(p.val()[0], 0.5f);  // p - g
  EXPECT_EQ(p.val()[1], 3.0f);
  EXPECT_EQ(p.val()[2], 3.0f);  // zero grad: unchanged
}

TEST(Autodiff, SgdMomentumTwoSteps) {
  Tensor<float> p = Tensor<float>::zeros({1}, "p");
  p.val()[0] = 10.0f;
  p.grad()[0] = 1.0f;
  SgdOptimizer<float> opt({p}, 0.9f);
  opt.step(1.0f);  // v = 1, p = 9
  EXPECT_NEAR(p.val()[0], 9.0f, 1e-7);
  opt.step(1.0f);  // v = 1.9, p = 9 - 1.9 = 7.1: cumulative 2.9 g
  EXPECT_NEAR(p.val()[0], 7.1f, 1e-6);
}

TEST(Autodiff, SgdNonFiniteGradNamesParameter) {
  Tensor<float> p = Tensor<float>::zeros({2}, "block1.conv2.weight");
  p.grad()[1] = std::numeric_limits<float>::quiet_NaN();
  SgdOptimizer<float> opt({p}, 0.9f);
  try {
    opt.step(0.1f);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("block1.conv2.weight"), std::string::npos);
  }
}

TEST(Autodiff, CheckpointRoundTripBitExact) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("refdepth_ckpt_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.ckpt").string();

  std::mt19937_64 rng(53);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  std::vector<NamedTensor> tensors;
  tensors.push_back({"alpha", {2, 3}, {}});
  tensors.push_back({"beta.gamma", {4}, {}});
  for (auto& t : tensors) {
    int64_t n = 1;
    for (int d : t.dims) n *= d;
    t.data.resize(n);
    for (auto& v : t.data) v = u(rng);
  }
  save_checkpoint(path, tensors);
  const auto back = load_checkpoint(path);
  ASSERT_EQ(back.size(), tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i) {
    EXPECT_EQ(back[i].name, tensors[i].name);
    EXPECT_EQ(back[i].dims, tensors[i].dims);
    EXPECT_EQ(back[i].data, tensors[i].data);  // bitwise
  }
  // byte-identical when re-saved
  save_checkpoint(path + ".2", back);
  std::ifstream a(path, std::ios::binary), b(path + ".2", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(bytes_a, bytes_b);
}

TEST(Autodiff, CheckpointRejectsGarbage) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("refdepth_ckpt_bad_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "bad.ckpt").string();
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOPE";
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), IoError);
}

TEST(Autodiff, ForwardDeterministic) {
  auto build_and_run = [] {
    std::mt19937_64 rng(71);
    Graph<float> g;
    Tensor<float> x = random_tensor<float>({2, 4, 6, 6}, rng);
    Tensor<float> w = random_tensor<float>({5, 4, 3, 3}, rng);
    Tensor<float> b = random_tensor<float>({5}, rng);
    Tensor<float> y = g.softmax_channels(g.relu(g.conv2d(x, w, b, 1, 1)));
    g.forward();
    return std::vector<float>(y.val(), y.val() + y.numel());
  };
  EXPECT_EQ(build_and_run(), build_and_run());
}
