// Copyright 2026 The biped_sim2real Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "biped/nn/adam.hpp"
#include "biped/nn/checkpoint.hpp"
#include "biped/nn/policy.hpp"
#include "nn_fixtures.hpp"

namespace biped::nn {
namespace {

using testing::CheckGradients;
using testing::SmallSpec;

class GradientTest : public ::testing::TestWithParam<Architecture> {};

TEST_P(GradientTest, MatchesCentralDifferences) {
  const int steps = GetParam() == Architecture::kRecurrent ? 3 : 2;
  const double err = CheckGradients(SmallSpec(GetParam()), steps, /*batch=*/3, /*seed=*/7);
  EXPECT_LT(err, 1e-4) << ToString(GetParam());
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, GradientTest,
                         ::testing::Values(Architecture::kFeedForward,
                                           Architecture::kFeedForwardHistory,
                                           Architecture::kRecurrent),
                         [](const auto& info) {
                           std::string s = ToString(info.param);
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(NetworkTest, ConstantOutputHasZeroGradient) {
  ActorCritic<double> net(SmallSpec(Architecture::kFeedForward));
  Rng rng(1);
  net.Init(rng);
  std::vector<Matrix<double>> xs = {Matrix<double>::Random(net.spec().InputWidth(), 4)};
  auto state = net.InitialState(4);
  std::vector<Matrix<double>> means, values;
  ActorCritic<double>::Cache cache;
  net.Forward(xs, state, means, values, &cache);
  Vector<double> grad = Vector<double>::Zero(net.NumParams());
  std::vector<Matrix<double>> zeros_m = {Matrix<double>::Zero(means[0].rows(), 4)};
  std::vector<Matrix<double>> zeros_v = {Matrix<double>::Zero(1, 4)};
  net.Backward(cache, zeros_m, zeros_v, grad);
  EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NetworkTest, ZeroParametersGiveZeroOutputs) {
  for (Architecture a : {Architecture::kFeedForward, Architecture::kRecurrent}) {
    ActorCritic<double> net(SmallSpec(a));
    auto state = net.InitialState(2);
    std::vector<Matrix<double>> xs = {Matrix<double>::Zero(net.spec().InputWidth(), 2)};
    std::vector<Matrix<double>> means, values;
    net.Forward(xs, state, means, values, nullptr);
    EXPECT_EQ(means[0].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(values[0].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(NetworkTest, ReluPassesPositivesOnly) {
  // One hidden unit, identity weights: output equals relu(input).
  NetworkSpec spec;
  spec.observation_size = 1;
  spec.action_size = 1;
  spec.hidden = {1};
  ActorCritic<double> net(spec);
  auto& p = net.params();
  p.setZero();
  // Layout: W1 (1x1), b1, W2 (1x1), b2, ...
  p[0] = 1.0;
  p[2] = 1.0;
  for (double x : {-0.7, 0.4}) {
    auto state = net.InitialState(1);
    std::vector<Matrix<double>> means, values;
    net.Forward({Matrix<double>::Constant(1, 1, x)}, state, means, values, nullptr);
    EXPECT_EQ(means[0](0, 0), std::max(0.0, x));
  }
}

TEST(NetworkTest, RecurrentIsDeterministicAndStateful) {
  ActorCritic<double> net(SmallSpec(Architecture::kRecurrent));
  Rng rng(3);
  net.Init(rng);
  std::vector<Matrix<double>> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(Matrix<double>::Random(net.spec().InputWidth(), 2));
  auto s1 = net.InitialState(2), s2 = net.InitialState(2);
  std::vector<Matrix<double>> m1, v1, m2, v2;
  net.Forward(xs, s1, m1, v1, nullptr);
  net.Forward(xs, s2, m2, v2, nullptr);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(m1[t], m2[t]);
  // Step-by-step with carried state equals the full sequence.
  auto s3 = net.InitialState(2);
  for (int t = 0; t < 4; ++t) {
    std::vector<Matrix<double>> m, v;
    net.Forward({xs[t]}, s3, m, v, nullptr);
    EXPECT_LT((m[0] - m1[t]).cwiseAbs().maxCoeff(), 1e-14);
  }
  // The same input at a later step gives a different output: memory.
  std::vector<Matrix<double>> same = {xs[0], xs[0]};
  auto s4 = net.InitialState(2);
  std::vector<Matrix<double>> m, v;
  net.Forward(same, s4, m, v, nullptr);
  EXPECT_GT((m[0] - m[1]).cwiseAbs().maxCoeff(), 0.0);
}

TEST(NetworkTest, WidthMismatchIsRejected) {
  ActorCritic<double> net(SmallSpec(Architecture::kFeedForwardHistory));
  auto state = net.InitialState(1);
  std::vector<Matrix<double>> means, values;
  EXPECT_THROW(net.Forward({Matrix<double>::Zero(net.spec().observation_size, 1)}, state, means,
                           values, nullptr),
               ConfigError);
}

TEST(InitTest, ParameterCountClosedForm) {
  const ActorCritic<float> net(NetworkSpec::Default(Architecture::kFeedForward));
  const int body = 28 * 256 + 256 + 256 * 256 + 256;
  EXPECT_EQ(net.NumParams(), (body + 256 * 6 + 6) + (body + 256 + 1) + 6);

  const ActorCritic<float> hist(NetworkSpec::Default(Architecture::kFeedForwardHistory));
  const int hbody = 112 * 256 + 256 + 256 * 256 + 256;
  EXPECT_EQ(hist.NumParams(), (hbody + 256 * 6 + 6) + (hbody + 256 + 1) + 6);

  const ActorCritic<float> lstm(NetworkSpec::Default(Architecture::kRecurrent));
  const int lbody = (4 * 128 * 28 + 4 * 128 + 4 * 128 * 128) + (4 * 128 * 128 * 2 + 4 * 128);
  EXPECT_EQ(lstm.NumParams(), (lbody + 128 * 6 + 6) + (lbody + 128 + 1) + 6);
}

TEST(InitTest, SmallInitialActionsAndFixedStd) {
  ActorCritic<float> net(NetworkSpec::Default(Architecture::kFeedForward));
  Rng rng(11);
  net.Init(rng);
  EXPECT_NEAR(std::exp(net.LogStd()[0]), 0.2, 1e-6);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix<float> x(28, 1);
    for (int i = 0; i < 28; ++i) x(i, 0) = n(rng);
    x /= x.norm();
    auto state = net.InitialState(1);
    std::vector<Matrix<float>> means, values;
    net.Forward({x}, state, means, values, nullptr);
    EXPECT_LT(means[0].norm(), 0.1f);
  }
  ActorCritic<float> again(NetworkSpec::Default(Architecture::kFeedForward));
  Rng rng2(11);
  again.Init(rng2);
  EXPECT_EQ(net.params(), again.params());
}

TEST(GaussianTest, LogProbAtModeAndSampling) {
  Vector<double> log_std(6);
  log_std << -1.0, -0.5, 0.0, 0.2, -2.0, -1.6;
  Matrix<double> mean = Matrix<double>::Random(6, 1);
  const double lp = GaussianLogProb<double>(mean, log_std, mean)(0);
  EXPECT_NEAR(lp, -log_std.sum() - 3.0 * std::log(2.0 * M_PI), 1e-12);

  // Small sigma: empirical std within 5% over 1e5 draws.
  Vector<double> small = Vector<double>::Constant(6, std::log(0.01));
  Rng rng(5);
  const int n = 100000;
  Matrix<double> m = Matrix<double>::Zero(6, n);
  auto [actions, logp] = SampleGaussian<double>(m, small, rng);
  EXPECT_TRUE(logp.allFinite());
  for (int i = 0; i < 6; ++i) {
    const double mu = actions.row(i).mean();
    const double sd = std::sqrt((actions.row(i).array() - mu).square().mean());
    EXPECT_NEAR(sd, 0.01, 0.05 * 0.01);
    EXPECT_NEAR(mu, 0.0, 1e-3);
  }
}

TEST(GaussianTest, LogStdClamped) {
  ActorCritic<float> net(SmallSpec(Architecture::kFeedForward));
  net.log_std_param().setConstant(-9.0f);
  EXPECT_EQ(net.LogStd()[0], -4.0f);
  EXPECT_EQ(net.LogStdPassMask()[0], 0.0f);
  net.log_std_param().setConstant(3.0f);
  EXPECT_EQ(net.LogStd()[0], 1.0f);
  net.log_std_param().setConstant(0.0f);
  EXPECT_EQ(net.LogStdPassMask()[0], 1.0f);
}

TEST(CheckpointTest, RoundTripIsBitIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "biped_nn_test";
  std::filesystem::create_directories(dir);
  for (Architecture a : {Architecture::kFeedForward, Architecture::kFeedForwardHistory,
                         Architecture::kRecurrent}) {
    ActorCritic<float> net(NetworkSpec::Default(a));
    Rng rng(2);
    net.Init(rng);
    CheckpointMeta meta;
    meta.feedback = false;
    const std::string path = (dir / (std::string(ToString(a)) + ".bin")).string();
    SaveCheckpoint(path, MakeCheckpoint(net, meta));
    const Checkpoint ck = LoadCheckpoint(path);
    EXPECT_EQ(ck.meta.spec, net.spec());
    EXPECT_FALSE(ck.meta.feedback);
    const ActorCritic<float> loaded = NetworkFromCheckpoint<float>(ck);
    EXPECT_EQ(loaded.params(), net.params());
    Matrix<float> x = Matrix<float>::Random(net.spec().InputWidth(), 3);
    auto s1 = net.InitialState(3), s2 = loaded.InitialState(3);
    std::vector<Matrix<float>> m1, v1, m2, v2;
    net.Forward({x, x}, s1, m1, v1, nullptr);
    loaded.Forward({x, x}, s2, m2, v2, nullptr);
    EXPECT_EQ(m1[1], m2[1]);
    EXPECT_EQ(v1[1], v2[1]);
  }
  // Corrupt header.
  const std::string bad = (dir / "bad.bin").string();
  std::ofstream(bad) << "nope";
  EXPECT_THROW(LoadCheckpoint(bad), ConfigError);
  EXPECT_THROW(LoadCheckpoint((dir / "missing.bin").string()), ConfigError);
}

TEST(HistoryTest, NewestFirstAndPaddedWithFirst) {
  ObservationHistory h(2, 3);
  h.Reset(Eigen::Vector2d(1, 1));
  EXPECT_EQ(h.Stacked(), (Eigen::VectorXd(6) << 1, 1, 1, 1, 1, 1).finished());
  h.Push(Eigen::Vector2d(2, 2));
  h.Push(Eigen::Vector2d(3, 3));
  EXPECT_EQ(h.Stacked(), (Eigen::VectorXd(6) << 3, 3, 2, 2, 1, 1).finished());
  h.Push(Eigen::Vector2d(4, 4));
  EXPECT_EQ(h.Stacked(), (Eigen::VectorXd(6) << 4, 4, 3, 3, 2, 2).finished());
}

TEST(AdamTest, MinimizesQuadratic) {
  Vector<double> x = Vector<double>::Constant(3, 5.0);
  Adam<double> opt(3, 0.1);
  for (int i = 0; i < 2000; ++i) {
    Vector<double> g = 2.0 * x;
    opt.Step(x, g);
  }
  EXPECT_LT(x.norm(), 1e-2);
  Vector<double> g = Vector<double>::Constant(4, 3.0);
  EXPECT_NEAR(ClipGradNorm(g, 1.0), 6.0, 1e-12);
  EXPECT_NEAR(g.norm(), 1.0, 1e-12);
}

TEST(LatencyTest, FullSizeFeedForwardUnderOneMillisecond) {
  ActorCritic<float> net(NetworkSpec::Default(Architecture::kFeedForward));
  Rng rng(1);
  net.Init(rng);
  Matrix<float> x = Matrix<float>::Random(28, 1);
  Carry<float> carry;
  std::vector<Matrix<float>> means;
  const int reps = 2000;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) {
    net.ForwardActor({x}, carry, means, nullptr);
    x(0, 0) = means[0](0, 0);
  }
  const double us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count() /
      reps;
  EXPECT_LT(us, 1000.0);
  RecordProperty("forward_us", std::to_string(us));
}

}  // namespace
}  // namespace biped::nn
