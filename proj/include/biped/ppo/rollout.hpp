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

// Parallel episode collection. Each rollout is one episode on its own
// environment with seeds derived from (master seed, iteration, rollout), and
// workers step their environments in lockstep so the policy runs batched.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "biped/env/environment.hpp"
#include "biped/nn/policy.hpp"
#include "biped/ppo/gae.hpp"

namespace biped::ppo {

using nn::Matrix;
using nn::Vector;
using RowVector = Eigen::Matrix<float, 1, Eigen::Dynamic>;

/// Builds the network input from raw observations: the observation itself,
/// or a newest-first stack of the last `history` observations.
class InputStack {
 public:
  explicit InputStack(const nn::NetworkSpec& spec)
      : history_(spec.arch == nn::Architecture::kFeedForwardHistory ? spec.history : 1),
        window_(kObservationSize, history_) {}

  void Reset(const Observation& first) { window_.Reset(first); }
  void Push(const Observation& o) { window_.Push(o); }
  void ReplaceNewest(const Observation& o) { window_.ReplaceNewest(o); }
  Eigen::VectorXd Input() const { return window_.Stacked(); }

 private:
  int history_;
  nn::ObservationHistory window_;
};

/// Copies columns `cols` of each carry matrix into a compact carry.
inline nn::Carry<float> GatherCarry(const nn::Carry<float>& full, const std::vector<int>& cols) {
  nn::Carry<float> out;
  for (std::size_t l = 0; l < full.h.size(); ++l) {
    out.h.emplace_back(full.h[l].rows(), static_cast<Eigen::Index>(cols.size()));
    out.c.emplace_back(full.c[l].rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out.h[l].col(k) = full.h[l].col(cols[k]);
      out.c[l].col(k) = full.c[l].col(cols[k]);
    }
  }
  return out;
}

inline void ScatterCarry(const nn::Carry<float>& part, const std::vector<int>& cols,
                         nn::Carry<float>& full) {
  for (std::size_t l = 0; l < full.h.size(); ++l) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      full.h[l].col(cols[k]) = part.h[l].col(k);
      full.c[l].col(cols[k]) = part.c[l].col(k);
    }
  }
}

/// Column-per-chunk copy of a carry, for recurrent training.
struct CarryColumns {
  std::vector<Eigen::VectorXf> h, c;
};

inline CarryColumns CarryColumn(const nn::Carry<float>& k, int col) {
  CarryColumns out;
  for (std::size_t l = 0; l < k.h.size(); ++l) {
    out.h.push_back(k.h[l].col(col));
    out.c.push_back(k.c[l].col(col));
  }
  return out;
}

inline nn::Carry<float> StackCarries(const std::vector<const CarryColumns*>& cols) {
  nn::Carry<float> out;
  if (cols.empty()) return out;
  const int n = static_cast<int>(cols.size());
  for (std::size_t l = 0; l < cols[0]->h.size(); ++l) {
    out.h.emplace_back(cols[0]->h[l].size(), n);
    out.c.emplace_back(cols[0]->c[l].size(), n);
    for (int k = 0; k < n; ++k) {
      out.h[l].col(k) = cols[k]->h[l];
      out.c[l].col(k) = cols[k]->c[l];
    }
  }
  return out;
}

/// Per-episode bookkeeping kept alongside the step data.
struct EpisodeInfo {
  EpisodeSegment segment;
  TerminationReason reason = TerminationReason::kNone;
  bool truncated = false;
  Mode mode = Mode::kStanding;
  double episode_return = 0.0;
  std::array<double, kNumRewardTerms> term_sums{};
  double tracking_sq_sum = 0.0;
  long tracking_count = 0;
};

struct RolloutBatch {
  int input_width = 0;
  Matrix<float> inputs;   // input_width x steps
  Matrix<float> actions;  // kActionSize x steps
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<EpisodeInfo> episodes;  // in rollout order, contiguous
  // Recurrent runs: carries at the start of every chunk, keyed by step index.
  int chunk_length = 0;
  std::vector<int> chunk_starts;
  std::vector<CarryColumns> actor_carries, critic_carries;

  int steps() const { return static_cast<int>(rewards.size()); }
  std::vector<EpisodeSegment> Segments() const {
    std::vector<EpisodeSegment> s;
    for (const auto& e : episodes) s.push_back(e.segment);
    return s;
  }
};

struct RolloutOptions {
  int rollouts = 64;
  int workers = 1;
  int chunk_length = 40;  // recurrent only
  bool deterministic = false;
};

/// Owns one environment per rollout slot; environments persist across
/// iterations and are re-seeded before each episode.
class RolloutCollector {
 public:
  RolloutCollector(const EnvConfig& cfg, const HeightField& field, RolloutOptions opt)
      : opt_(opt) {
    if (opt_.rollouts <= 0) throw ConfigError("ppo.rollouts_per_batch: must be > 0");
    if (opt_.workers <= 0) throw ConfigError("run.workers: must be > 0");
    if (opt_.chunk_length <= 0) throw ConfigError("ppo.chunk_length: must be > 0");
    for (int r = 0; r < opt_.rollouts; ++r) {
      envs_.push_back(std::make_unique<LocomotionEnv>(cfg, field, 0));
    }
  }

  const RolloutOptions& options() const { return opt_; }

  RolloutBatch Collect(const nn::ActorCritic<float>& net, std::uint64_t master_seed,
                       std::uint64_t iteration) {
    std::vector<Trajectory> trajs(opt_.rollouts);
    const int workers = std::min(opt_.workers, opt_.rollouts);
    if (workers == 1) {
      RunWorker(net, master_seed, iteration, 0, 1, trajs);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] { RunWorker(net, master_seed, iteration, w, workers, trajs); });
      }
      for (auto& t : pool) t.join();
    }
    return Assemble(net.spec(), trajs);
  }

 private:
  struct Trajectory {
    std::vector<Eigen::VectorXf> inputs;
    std::vector<Eigen::VectorXf> actions;
    std::vector<double> log_probs, values, rewards;
    std::vector<int> chunk_starts;  // local step index
    std::vector<CarryColumns> actor_carries, critic_carries;
    EpisodeInfo info;
  };

  void RunWorker(const nn::ActorCritic<float>& net, std::uint64_t master_seed,
                 std::uint64_t iteration, int worker, int workers,
                 std::vector<Trajectory>& trajs) {
    std::vector<int> slots;
    for (int r = worker; r < opt_.rollouts; r += workers) slots.push_back(r);
    const int n = static_cast<int>(slots.size());
    const nn::NetworkSpec& spec = net.spec();
    const bool recurrent = spec.recurrent();

    std::vector<InputStack> stacks(n, InputStack(spec));
    std::vector<Rng> noise(n);
    enum class Phase { kActive, kBootstrap, kDone };
    std::vector<Phase> phase(n, Phase::kActive);
    for (int k = 0; k < n; ++k) {
      const int r = slots[k];
      LocomotionEnv& env = *envs_[r];
      env.Seed(DeriveSeed(master_seed, iteration, 2 * r));
      noise[k].seed(DeriveSeed(master_seed, iteration, 2 * r + 1));
      stacks[k].Reset(env.Reset());
      trajs[r] = Trajectory{};
      trajs[r].info.mode = env.command().mode;
    }
    typename nn::ActorCritic<float>::State state = net.InitialState(n);
    const Vector<float> log_std = net.LogStd();

    std::vector<int> live;
    for (;;) {
      live.clear();
      for (int k = 0; k < n; ++k) {
        if (phase[k] != Phase::kDone) live.push_back(k);
      }
      if (live.empty()) break;
      const int m = static_cast<int>(live.size());
      Matrix<float> x(spec.InputWidth(), m);
      for (int i = 0; i < m; ++i) x.col(i) = stacks[live[i]].Input().cast<float>();

      typename nn::ActorCritic<float>::State sub;
      if (recurrent) {
        sub.actor = GatherCarry(state.actor, live);
        sub.critic = GatherCarry(state.critic, live);
        // Remember the carry entering each chunk boundary.
        for (int i = 0; i < m; ++i) {
          Trajectory& tr = trajs[slots[live[i]]];
          const int t = static_cast<int>(tr.rewards.size());
          if (phase[live[i]] == Phase::kActive && t % opt_.chunk_length == 0) {
            tr.chunk_starts.push_back(t);
            tr.actor_carries.push_back(CarryColumn(sub.actor, i));
            tr.critic_carries.push_back(CarryColumn(sub.critic, i));
          }
        }
      }
      std::vector<Matrix<float>> means, values;
      net.Forward({x}, sub, means, values, nullptr);
      if (recurrent) {
        ScatterCarry(sub.actor, live, state.actor);
        ScatterCarry(sub.critic, live, state.critic);
      }

      for (int i = 0; i < m; ++i) {
        const int k = live[i];
        Trajectory& tr = trajs[slots[k]];
        const double value = values[0](0, i);
        if (phase[k] == Phase::kBootstrap) {
          tr.info.segment.bootstrap_value = value;
          phase[k] = Phase::kDone;
          continue;
        }
        Matrix<float> action = means[0].col(i);
        double logp = 0.0;
        if (opt_.deterministic) {
          logp = nn::GaussianLogProb<float>(action, log_std, action)(0);
        } else {
          auto [a, lp] = nn::SampleGaussian<float>(action, log_std, noise[k]);
          action = a;
          logp = lp(0);
        }
        LocomotionEnv& env = *envs_[slots[k]];
        const StepResult& res = env.Step(action.col(0).cast<double>());
        tr.inputs.push_back(x.col(i));
        tr.actions.push_back(action.col(0));
        tr.log_probs.push_back(logp);
        tr.values.push_back(value);
        tr.rewards.push_back(res.reward);
        tr.info.episode_return += res.reward;
        const auto terms = res.parts.Terms();
        for (int j = 0; j < kNumRewardTerms; ++j) tr.info.term_sums[j] += terms[j];
        tr.info.tracking_sq_sum += res.tracking_sq_sum;
        tr.info.tracking_count += res.tracking_count;
        if (res.done()) {
          tr.info.reason = res.termination.reason;
          tr.info.truncated = res.termination.status == StepStatus::kTruncated;
          phase[k] = tr.info.truncated ? Phase::kBootstrap : Phase::kDone;
        }
        stacks[k].Push(env.observation());
      }
    }
  }

  RolloutBatch Assemble(const nn::NetworkSpec& spec, std::vector<Trajectory>& trajs) const {
    RolloutBatch b;
    b.input_width = spec.InputWidth();
    b.chunk_length = spec.recurrent() ? opt_.chunk_length : 0;
    int total = 0;
    for (const auto& t : trajs) total += static_cast<int>(t.rewards.size());
    b.inputs.resize(b.input_width, total);
    b.actions.resize(kActionSize, total);
    b.log_probs.reserve(total);
    b.values.reserve(total);
    b.rewards.reserve(total);
    int at = 0;
    for (auto& t : trajs) {
      const int len = static_cast<int>(t.rewards.size());
      for (int i = 0; i < len; ++i) {
        b.inputs.col(at + i) = t.inputs[i];
        b.actions.col(at + i) = t.actions[i];
      }
      b.log_probs.insert(b.log_probs.end(), t.log_probs.begin(), t.log_probs.end());
      b.values.insert(b.values.end(), t.values.begin(), t.values.end());
      b.rewards.insert(b.rewards.end(), t.rewards.begin(), t.rewards.end());
      for (std::size_t c = 0; c < t.chunk_starts.size(); ++c) {
        b.chunk_starts.push_back(at + t.chunk_starts[c]);
        b.actor_carries.push_back(std::move(t.actor_carries[c]));
        b.critic_carries.push_back(std::move(t.critic_carries[c]));
      }
      t.info.segment.start = at;
      t.info.segment.length = len;
      b.episodes.push_back(t.info);
      at += len;
    }
    return b;
  }

  RolloutOptions opt_;
  std::vector<std::unique_ptr<LocomotionEnv>> envs_;
};

}  // namespace biped::ppo
