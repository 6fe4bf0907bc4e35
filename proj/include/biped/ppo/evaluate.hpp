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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "biped/env/environment.hpp"
#include "biped/nn/policy.hpp"
#include "biped/ppo/mirror.hpp"
#include "biped/ppo/rollout.hpp"

namespace biped::ppo {

/// Drives one environment with a policy: keeps the history window or the
/// recurrent carry between calls.
class PolicyRunner {
 public:
  explicit PolicyRunner(const nn::ActorCritic<float>& net)
      : net_(net), stack_(net.spec()), log_std_(net.LogStd()) {}

  void Reset(const Observation& first) {
    stack_.Reset(first);
    state_ = net_.InitialState(1);
  }

  /// Action for the current input; samples when `rng` is given, else the mean.
  JointVector Act(Rng* rng = nullptr) {
    Matrix<float> x = stack_.Input().cast<float>();
    std::vector<Matrix<float>> means, values;
    net_.Forward({x}, state_, means, values, nullptr);
    last_value_ = values[0](0, 0);
    last_input_ = x;
    Matrix<float> a = means[0];
    if (rng) a = nn::SampleGaussian<float>(a, log_std_, *rng).first;
    return a.col(0).cast<double>();
  }

  void Observe(const Observation& o) { stack_.Push(o); }
  void Replace(const Observation& o) { stack_.ReplaceNewest(o); }
  double last_value() const { return last_value_; }
  const Matrix<float>& last_input() const { return last_input_; }

 private:
  const nn::ActorCritic<float>& net_;
  InputStack stack_;
  Vector<float> log_std_;
  typename nn::ActorCritic<float>::State state_;
  double last_value_ = 0.0;
  Matrix<float> last_input_;
};

/// Command change applied before the control step with index `step`.
struct ScheduledCommand {
  int step = 0;
  ModeCommand command;
};

struct EvalOptions {
  int episodes = 10;
  bool deterministic = true;
  std::uint64_t seed = 1;
  // Overrides the sampled episode command when set.
  std::optional<ModeCommand> command;
  std::vector<ScheduledCommand> schedule;
  bool collect_inputs = false;  // keep every policy input (mirror defect sets)
};

/// Per-step record handed to an optional trace sink.
struct TraceRow {
  int episode = 0;
  int step = 0;
  double time = 0.0;
  ModeCommand command;
  double reward = 0.0;
  double root_x = 0.0, root_z = 0.0, pitch = 0.0, root_vx = 0.0;
  JointVector tau_pd = JointVector::Zero();
  JointVector tau_applied = JointVector::Zero();
};

struct EpisodeMetrics {
  double episode_return = 0.0;
  int length = 0;
  bool truncated = false;
  TerminationReason reason = TerminationReason::kNone;
  double tracking_rmse = 0.0;
  double velocity_error = 0.0;  // RMS of (root speed - reference), walking only
  Mode mode = Mode::kStanding;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd Summarize(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(xs.size()));
  return m;
}

inline double Median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

struct EvalMetrics {
  std::vector<EpisodeMetrics> episodes;
  MeanStd episode_return, length, time_to_fall, tracking_rmse, velocity_error;
  double median_time_to_fall = 0.0;
  int truncations = 0;
  MeanStd mirror_defect;  // over every visited input
  double median_mirror_defect = 0.0;
  Matrix<float> inputs;  // when collect_inputs
};

/// Runs `opt.episodes` episodes; time-to-fall is the episode length, equal
/// to the step limit for truncated episodes. Torque-tracking RMSE pools
/// (tau_pd - tau_applied) over joints, substeps and steps of an episode.
inline EvalMetrics EvaluatePolicy(const nn::ActorCritic<float>& net, const EnvConfig& cfg,
                                  const HeightField& field, const EvalOptions& opt,
                                  const std::function<void(const TraceRow&)>& trace = {}) {
  EvalMetrics out;
  LocomotionEnv env(cfg, field, 0);
  PolicyRunner runner(net);
  const MirrorSpec mirror = MirrorSpec::ForLayout(
      cfg.episode.cycle_period,
      net.spec().arch == nn::Architecture::kFeedForwardHistory ? net.spec().history : 1);
  std::vector<Eigen::VectorXf> visited;
  for (int ep = 0; ep < opt.episodes; ++ep) {
    env.Seed(DeriveSeed(opt.seed, 0xE7A1, ep));
    Rng noise(DeriveSeed(opt.seed, 0xE7A2, ep));
    env.Reset();
    if (opt.command) env.SetCommand(*opt.command);
    runner.Reset(env.observation());
    EpisodeMetrics m;
    m.mode = env.command().mode;
    double sq = 0.0, vel_sq = 0.0;
    long count = 0;
    int vel_n = 0;
    std::size_t next = 0;
    for (;;) {
      while (next < opt.schedule.size() && opt.schedule[next].step <= env.step_count()) {
        env.SetCommand(opt.schedule[next++].command);
        // The command enters the current observation.
        runner.Replace(env.observation());
      }
      const JointVector a = runner.Act(opt.deterministic ? nullptr : &noise);
      if (opt.collect_inputs || !net.spec().recurrent()) {
        visited.push_back(runner.last_input().col(0));
      }
      const ModeCommand cmd = env.command();
      const StepResult& r = env.Step(a);
      m.episode_return += r.reward;
      ++m.length;
      sq += r.tracking_sq_sum;
      count += r.tracking_count;
      if (cmd.mode == Mode::kWalking) {
        const double e = env.plant().qd[kRootX] - cmd.reference;
        vel_sq += e * e;
        ++vel_n;
      }
      if (trace) {
        TraceRow row;
        row.episode = ep;
        row.step = env.step_count() - 1;
        row.time = env.step_count() * cfg.episode.ControlDt();
        row.command = cmd;
        row.reward = r.reward;
        row.root_x = env.plant().q[kRootX];
        row.root_z = env.plant().q[kRootZ];
        row.pitch = env.plant().q[kRootPitch];
        row.root_vx = env.plant().qd[kRootX];
        row.tau_pd = env.actuator().tau_pd;
        row.tau_applied = env.actuator().tau_applied;
        trace(row);
      }
      if (r.done()) {
        m.truncated = r.termination.status == StepStatus::kTruncated;
        m.reason = r.termination.reason;
        break;
      }
      runner.Observe(env.observation());
    }
    m.tracking_rmse = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
    m.velocity_error = vel_n ? std::sqrt(vel_sq / vel_n) : 0.0;
    out.episodes.push_back(m);
  }

  std::vector<double> ret, len, rmse, vel;
  for (const auto& m : out.episodes) {
    ret.push_back(m.episode_return);
    len.push_back(m.length);
    rmse.push_back(m.tracking_rmse);
    if (m.mode == Mode::kWalking || !opt.schedule.empty()) vel.push_back(m.velocity_error);
    out.truncations += m.truncated ? 1 : 0;
  }
  out.episode_return = Summarize(ret);
  out.length = Summarize(len);
  out.time_to_fall = out.length;
  out.median_time_to_fall = Median(len);
  out.tracking_rmse = Summarize(rmse);
  out.velocity_error = Summarize(vel);

  // The defect is defined on single inputs, so recurrent policies skip it.
  if (!visited.empty()) {
    Matrix<float> inputs(visited.front().size(), static_cast<Eigen::Index>(visited.size()));
    for (std::size_t i = 0; i < visited.size(); ++i) inputs.col(i) = visited[i];
    if (!net.spec().recurrent()) {
      const std::vector<double> d = MirrorDefects<float>(net, mirror, inputs);
      out.mirror_defect = Summarize(d);
      out.median_mirror_defect = Median(d);
    }
    if (opt.collect_inputs) out.inputs = std::move(inputs);
  }
  return out;
}

}  // namespace biped::ppo
