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

// Collect / advantage / update loop. Each iteration yields one metrics record
// (deterministic given seed and worker count) and one timing record.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "biped/nn/checkpoint.hpp"
#include "biped/ppo/gae.hpp"
#include "biped/ppo/ppo.hpp"
#include "biped/ppo/rollout.hpp"

namespace biped::ppo {

struct TrainOptions {
  EnvConfig env;
  nn::NetworkSpec network;
  PpoConfig ppo;
  std::uint64_t seed = 1;
  int workers = 1;
  int max_iterations = 0;  // 0: run to the sample budget
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationRecord {
  nlohmann::json metrics;
  nlohmann::json timing;
};

/// Streams (iteration, seconds, ...) so callers can persist as they go.
using IterationSink = std::function<void(int iteration, const IterationRecord&,
                                         const nn::ActorCritic<float>& net)>;

inline HeightField TrainingTerrain(const EnvConfig& env, std::uint64_t seed) {
  if (!env.episode.terrain) return HeightField::Flat();
  Rng rng(DeriveSeed(seed, 0x7E11));
  return GenerateHeightField(env.terrain, rng);
}

class Trainer {
 public:
  explicit Trainer(TrainOptions opt) : opt_(std::move(opt)), net_(opt_.network) {
    opt_.env.episode.max_steps = opt_.ppo.max_rollout_length;
    opt_.env.Validate();
    opt_.ppo.Validate();
    if (opt_.network.observation_size != kObservationSize ||
        opt_.network.action_size != kActionSize) {
      throw ConfigError("network: observation/action sizes must match the environment (" +
                        std::to_string(kObservationSize) + ", " + std::to_string(kActionSize) +
                        ")");
    }
    Rng init(DeriveSeed(opt_.seed, 0x1A17));
    net_.Init(init);
    field_ = TrainingTerrain(opt_.env, opt_.seed);
    collector_ = std::make_unique<RolloutCollector>(
        opt_.env, field_,
        RolloutOptions{opt_.ppo.rollouts_per_batch, opt_.workers, opt_.ppo.chunk_length, false});
    updater_ = std::make_unique<PpoUpdater>(
        net_, opt_.ppo,
        MirrorSpec::ForLayout(opt_.env.episode.cycle_period,
                              opt_.network.arch == nn::Architecture::kFeedForwardHistory
                                  ? opt_.network.history
                                  : 1));
    update_rng_.seed(DeriveSeed(opt_.seed, 0x0BD7));
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const nn::ActorCritic<float>& network() const { return net_; }
  const TrainOptions& options() const { return opt_; }
  const HeightField& terrain() const { return field_; }
  std::int64_t total_samples() const { return total_; }

  nn::CheckpointMeta Meta() const {
    nn::CheckpointMeta m;
    m.spec = net_.spec();
    m.action_scale = opt_.env.episode.action_scale;
    m.cycle_period = opt_.env.episode.cycle_period;
    m.feedback = opt_.env.episode.feedback;
    return m;
  }

  bool Done() const {
    return total_ >= opt_.ppo.sample_budget ||
           (opt_.max_iterations > 0 && iteration_ >= opt_.max_iterations);
  }

  /// One collect + update cycle.
  IterationRecord Iterate() {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    ++iteration_;
    const RolloutBatch batch = collector_->Collect(net_, opt_.seed, iteration_);
    const auto t1 = Clock::now();
    GaeResult gae = ComputeGae(batch.rewards, batch.values, batch.Segments(), opt_.ppo.gamma,
                               opt_.ppo.lambda);
    NormalizeAdvantages(gae.advantages);
    const UpdateStats stats = updater_->Update(batch, gae.advantages, gae.returns, update_rng_);
    const auto t2 = Clock::now();
    total_ += batch.steps();
    consecutive_skips_ = stats.skipped ? consecutive_skips_ + 1 : 0;

    IterationRecord rec;
    rec.metrics = Metrics(batch, stats);
    const double collect_s = std::chrono::duration<double>(t1 - t0).count();
    const double update_s = std::chrono::duration<double>(t2 - t1).count();
    wall_ += collect_s + update_s;
    rec.timing = {{"iteration", iteration_},
                  {"samples", batch.steps()},
                  {"collect_s", collect_s},
                  {"update_s", update_s},
                  {"iteration_s", collect_s + update_s},
                  {"wall_s", wall_}};
    if (consecutive_skips_ >= 3 || !net_.params().allFinite()) {
      throw TrainingDiverged("training diverged at iteration " + std::to_string(iteration_) +
                             ": " + stats.message);
    }
    return rec;
  }

  void Run(const IterationSink& sink) {
    while (!Done()) {
      const IterationRecord rec = Iterate();
      if (sink) sink(iteration_, rec, net_);
    }
  }

  int iteration() const { return iteration_; }

 private:
  nlohmann::json Metrics(const RolloutBatch& batch, const UpdateStats& s) const {
    double ret = 0.0, ret_sq = 0.0, len = 0.0, tsq = 0.0;
    long tcount = 0;
    std::array<double, 3> mode_ret{}, mode_len{};
    std::array<int, 3> mode_n{};
    std::array<double, kNumRewardTerms> terms{};
    nlohmann::json reasons = nlohmann::json::object();
    for (const EpisodeInfo& e : batch.episodes) {
      ret += e.episode_return;
      ret_sq += e.episode_return * e.episode_return;
      len += e.segment.length;
      const int m = static_cast<int>(e.mode);
      mode_ret[m] += e.episode_return;
      mode_len[m] += e.segment.length;
      ++mode_n[m];
      for (int j = 0; j < kNumRewardTerms; ++j) terms[j] += e.term_sums[j];
      tsq += e.tracking_sq_sum;
      tcount += e.tracking_count;
      const std::string why = ToString(e.reason);
      reasons[why] = reasons.value(why, 0) + 1;
    }
    const double n = static_cast<double>(batch.episodes.size());
    nlohmann::json j;
    j["iteration"] = iteration_;
    j["samples"] = batch.steps();
    j["total_samples"] = total_;
    j["episodes"] = batch.episodes.size();
    j["mean_return"] = ret / n;
    j["std_return"] = std::sqrt(std::max(0.0, ret_sq / n - (ret / n) * (ret / n)));
    j["mean_length"] = len / n;
    for (int m = 0; m < 3; ++m) {
      const std::string name = ToString(static_cast<Mode>(m));
      j["mode_return"][name] = mode_n[m] ? nlohmann::json(mode_ret[m] / mode_n[m]) : nlohmann::json();
      j["mode_length"][name] = mode_n[m] ? nlohmann::json(mode_len[m] / mode_n[m]) : nlohmann::json();
      j["mode_episodes"][name] = mode_n[m];
    }
    for (int t = 0; t < kNumRewardTerms; ++t) {
      j["reward_terms"][kRewardTermNames[t]] = terms[t] / std::max(1, batch.steps());
    }
    j["terminations"] = reasons;
    j["tracking_rmse"] = tcount ? std::sqrt(tsq / static_cast<double>(tcount)) : 0.0;
    j["policy_loss"] = s.policy_loss;
    j["value_loss"] = s.value_loss;
    j["symmetry_loss"] = s.symmetry_loss;
    j["entropy"] = s.entropy;
    j["approx_kl"] = s.approx_kl;
    j["clip_fraction"] = s.clip_fraction;
    j["grad_norm"] = s.grad_norm;
    j["update_skipped"] = s.skipped;
    if (s.skipped) j["diagnostic"] = s.message;
    return j;
  }

  TrainOptions opt_;
  nn::ActorCritic<float> net_;
  HeightField field_;
  std::unique_ptr<RolloutCollector> collector_;
  std::unique_ptr<PpoUpdater> updater_;
  Rng update_rng_;
  int iteration_ = 0;
  std::int64_t total_ = 0;
  int consecutive_skips_ = 0;
  double wall_ = 0.0;
};

}  // namespace biped::ppo
