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

// Actor-critic pair with a diagonal Gaussian policy head. The flat parameter
// vector is laid out as [actor | critic | log-std].

#pragma once

#include <cmath>
#include <deque>
#include <random>
#include <utility>
#include <vector>

#include "biped/nn/network.hpp"

namespace biped::nn {

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;
inline constexpr double kInitialStd = 0.2;
inline constexpr double kPolicyOutputGain = 0.01;

template <typename S>
class ActorCritic {
 public:
  struct State {
    Carry<S> actor;
    Carry<S> critic;
  };
  struct Cache {
    typename Body<S>::Cache actor;
    typename Body<S>::Cache critic;
  };

  ActorCritic() : ActorCritic(NetworkSpec{}) {}
  explicit ActorCritic(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.Validate();
    ParamAllocator alloc;
    actor_ = Body<S>(spec_, spec_.action_size, alloc);
    critic_offset_ = alloc.size();
    ParamAllocator critic_alloc;
    critic_ = Body<S>(spec_, 1, critic_alloc);
    alloc.Take(critic_alloc.size());
    log_std_offset_ = alloc.Take(spec_.action_size);
    params_ = Vector<S>::Zero(alloc.size());
  }

  void Init(Rng& rng) {
    actor_.Init(params_.data(), kPolicyOutputGain, rng);
    critic_.Init(params_.data() + critic_offset_, 1.0, rng);
    log_std_param().setConstant(static_cast<S>(std::log(kInitialStd)));
  }

  const NetworkSpec& spec() const { return spec_; }
  int NumParams() const { return static_cast<int>(params_.size()); }
  Vector<S>& params() { return params_; }
  const Vector<S>& params() const { return params_; }
  int critic_offset() const { return critic_offset_; }
  int log_std_offset() const { return log_std_offset_; }

  Eigen::Map<Vector<S>> log_std_param() {
    return {params_.data() + log_std_offset_, spec_.action_size};
  }
  Eigen::Map<const Vector<S>> log_std_param() const {
    return {params_.data() + log_std_offset_, spec_.action_size};
  }
  /// Effective log standard deviation, clamped to [kLogStdMin, kLogStdMax].
  Vector<S> LogStd() const {
    return log_std_param().cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
  }
  /// 1 where the clamp is inactive (the gradient passes), else 0.
  Vector<S> LogStdPassMask() const {
    const auto p = log_std_param().array();
    return ((p >= S(kLogStdMin)) && (p <= S(kLogStdMax))).template cast<S>().matrix();
  }

  State InitialState(int batch) const {
    return {actor_.InitialCarry(batch), critic_.InitialCarry(batch)};
  }

  void Forward(const std::vector<Matrix<S>>& xs, State& state, std::vector<Matrix<S>>& means,
               std::vector<Matrix<S>>& values, Cache* cache) const {
    CheckWidth(xs);
    actor_.Forward(params_.data(), xs, state.actor, means, cache ? &cache->actor : nullptr);
    critic_.Forward(params_.data() + critic_offset_, xs, state.critic, values,
                    cache ? &cache->critic : nullptr);
  }

  /// Actor only, for deployment and the symmetry loss.
  void ForwardActor(const std::vector<Matrix<S>>& xs, Carry<S>& carry,
                    std::vector<Matrix<S>>& means, typename Body<S>::Cache* cache) const {
    CheckWidth(xs);
    actor_.Forward(params_.data(), xs, carry, means, cache);
  }

  /// Accumulates into `grad` (same layout as params). Either gradient list may
  /// be empty to skip that network.
  void Backward(const Cache& cache, const std::vector<Matrix<S>>& dmeans,
                const std::vector<Matrix<S>>& dvalues, Vector<S>& grad) const {
    if (!dmeans.empty()) actor_.Backward(params_.data(), cache.actor, dmeans, grad.data());
    if (!dvalues.empty()) {
      critic_.Backward(params_.data() + critic_offset_, cache.critic, dvalues,
                       grad.data() + critic_offset_);
    }
  }

  void BackwardActor(const typename Body<S>::Cache& cache, const std::vector<Matrix<S>>& dmeans,
                     Vector<S>& grad) const {
    actor_.Backward(params_.data(), cache, dmeans, grad.data());
  }

 private:
  void CheckWidth(const std::vector<Matrix<S>>& xs) const {
    for (const auto& x : xs) {
      if (x.rows() != spec_.InputWidth()) {
        throw ConfigError("network input width " + std::to_string(x.rows()) +
                          " does not match spec width " + std::to_string(spec_.InputWidth()));
      }
    }
  }

  NetworkSpec spec_;
  Body<S> actor_;
  Body<S> critic_;
  int critic_offset_ = 0;
  int log_std_offset_ = 0;
  Vector<S> params_;
};

/// Diagonal Gaussian log-density of `action` (one column per sample).
template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> GaussianLogProb(const Matrix<S>& mean,
                                                   const Vector<S>& log_std,
                                                   const Matrix<S>& action) {
  const Vector<S> inv_std = (-log_std.array()).exp().matrix();
  const Matrix<S> z = (action - mean).array().colwise() * inv_std.array();
  const S constant = -log_std.sum() - S(0.5 * std::log(2.0 * M_PI)) * S(log_std.size());
  return (S(-0.5) * z.array().square().colwise().sum() + constant).matrix();
}

template <typename S>
S GaussianEntropy(const Vector<S>& log_std) {
  return log_std.sum() + S(0.5 * (1.0 + std::log(2.0 * M_PI))) * S(log_std.size());
}

/// Draws one action per column of `mean`; returns (actions, log-probs).
template <typename S>
std::pair<Matrix<S>, Eigen::Matrix<S, 1, Eigen::Dynamic>> SampleGaussian(
    const Matrix<S>& mean, const Vector<S>& log_std, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<S> eps(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j) {
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = static_cast<S>(n(rng));
  }
  const Vector<S> std_dev = log_std.array().exp().matrix();
  Matrix<S> action = mean + (eps.array().colwise() * std_dev.array()).matrix();
  return {action, GaussianLogProb<S>(mean, log_std, action)};
}

/// Rolling window of the most recent observations, newest first. The first
/// observation of an episode fills the whole window.
class ObservationHistory {
 public:
  ObservationHistory(int observation_size, int length)
      : size_(observation_size), length_(length) {}

  void Reset(const Eigen::VectorXd& first) {
    window_.assign(length_, first);
  }

  void Push(const Eigen::VectorXd& obs) {
    window_.pop_back();
    window_.push_front(obs);
  }

  /// Overwrites the newest entry, e.g. after a command change within a step.
  void ReplaceNewest(const Eigen::VectorXd& obs) { window_.front() = obs; }

  Eigen::VectorXd Stacked() const {
    Eigen::VectorXd out(size_ * length_);
    for (int k = 0; k < length_; ++k) out.segment(k * size_, size_) = window_[k];
    return out;
  }

 private:
  int size_;
  int length_;
  std::deque<Eigen::VectorXd> window_;
};

}  // namespace biped::nn
