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

// Episodic locomotion task: 40 Hz policy steps over a 1 kHz plant, with
// per-episode mode, dynamics, and terrain randomization.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "biped/actuator/actuator.hpp"
#include "biped/env/gait.hpp"
#include "biped/env/observation.hpp"
#include "biped/env/randomization.hpp"
#include "biped/env/reward.hpp"
#include "biped/sim/dynamics.hpp"
#include "biped/sim/terrain.hpp"

namespace biped {

/// How the command is chosen at episode start.
struct ModeSampling {
  bool uniform_modes = true;  // otherwise always `fixed_mode`
  Mode fixed_mode = Mode::kStanding;
  double walk_min = kWalkingSpeedMin;
  double walk_max = kWalkingSpeedMax;
  double turn_max = kTurnRateMax;
};

struct EpisodeConfig {
  int max_steps = 400;
  int substeps = 25;
  double sim_dt = 1e-3;  // s
  double min_root_height = 0.6;  // m
  double max_root_height = 1.0;  // m
  double pitch_limit = 0.7;      // rad
  bool terminate_on_feet = false;
  double feet_distance_threshold = 0.2;  // m
  // Off only for fixed-length timing runs.
  bool terminations = true;
  bool randomize_dynamics = true;
  bool terrain = true;
  bool feedback = true;
  BemfConfig bemf;
  ModeSampling sampling;
  int cycle_period = 40;       // control steps
  double reset_noise = 0.02;   // rad, per joint
  double action_scale = 0.5;   // rad per unit action
  PlantKind plant = PlantKind::kTraining;
  ContactSolver solver = ContactSolver::kPenalty;

  double ControlDt() const { return sim_dt * substeps; }

  void Validate() const {
    if (max_steps <= 0) throw ConfigError("episode.max_steps: must be > 0");
    if (substeps <= 0) throw ConfigError("episode.substeps: must be > 0");
    if (!(sim_dt > 0.0 && sim_dt <= 2e-3)) throw ConfigError("episode.sim_dt: must be in (0, 0.002]");
    if (!(min_root_height > 0.0 && max_root_height > min_root_height)) {
      throw ConfigError("episode.root_height: require 0 < min < max");
    }
    if (!(pitch_limit > 0.0)) throw ConfigError("episode.pitch_limit: must be > 0");
    if (!(feet_distance_threshold > 0.0)) {
      throw ConfigError("episode.feet_distance_threshold: must be > 0");
    }
    if (cycle_period < 2) throw ConfigError("episode.cycle_period: must be >= 2");
    if (!(reset_noise >= 0.0)) throw ConfigError("episode.reset_noise: must be >= 0");
    if (!(action_scale > 0.0)) throw ConfigError("episode.action_scale: must be > 0");
    if (!(sampling.walk_min >= kWalkingSpeedMin && sampling.walk_max <= kWalkingSpeedMax &&
          sampling.walk_min <= sampling.walk_max)) {
      throw ConfigError("episode.walk_reference: must lie within [0, 0.4]");
    }
    if (!(sampling.turn_max >= 0.0 && sampling.turn_max <= kTurnRateMax)) {
      throw ConfigError("episode.turn_reference: must lie within [0, 0.5]");
    }
    bemf.Validate();
  }
};

/// Everything an environment instance needs besides its seed and the
/// run-level height field.
struct EnvConfig {
  RobotModel model = DefaultRobotModel();
  ActuatorParams actuator;
  EpisodeConfig episode;
  RewardWeights weights;
  GaitSchedule gait;
  DynamicsRandomization randomization;
  TerrainParams terrain;

  void Validate() const {
    model.Validate();
    actuator.Validate();
    episode.Validate();
    weights.Validate();
    gait.Validate();
    randomization.Validate();
  }
};

enum class StepStatus { kContinue, kTerminated, kTruncated };

enum class TerminationReason { kNone, kHeight, kPitch, kFeet, kDiverged, kTimeLimit };

inline const char* ToString(TerminationReason r) {
  switch (r) {
    case TerminationReason::kNone: return "none";
    case TerminationReason::kHeight: return "height";
    case TerminationReason::kPitch: return "pitch";
    case TerminationReason::kFeet: return "feet";
    case TerminationReason::kDiverged: return "diverged";
    case TerminationReason::kTimeLimit: return "time_limit";
  }
  return "?";
}

struct Termination {
  StepStatus status = StepStatus::kContinue;
  TerminationReason reason = TerminationReason::kNone;
};

/// `step` counts completed control steps.
inline Termination CheckTermination(const PlantState& s, const RobotModel& m,
                                    const EpisodeConfig& cfg, int step) {
  if (cfg.terminations) {
    const double h = s.q[kRootZ];
    if (h < cfg.min_root_height || h > cfg.max_root_height) {
      return {StepStatus::kTerminated, TerminationReason::kHeight};
    }
    if (std::abs(s.q[kRootPitch]) > cfg.pitch_limit) {
      return {StepStatus::kTerminated, TerminationReason::kPitch};
    }
    if (cfg.terminate_on_feet && FeetDistance(s, m) < cfg.feet_distance_threshold) {
      return {StepStatus::kTerminated, TerminationReason::kFeet};
    }
  }
  if (step >= cfg.max_steps) return {StepStatus::kTruncated, TerminationReason::kTimeLimit};
  return {};
}

struct EpisodeStart {
  PlantState plant;
  ActuatorState actuator;
  ModeCommand mode;
  ClockState clock;
  RobotModel model;
  HeightField terrain;
};

inline ModeCommand SampleMode(const ModeSampling& s, Rng& rng) {
  ModeCommand c;
  c.mode = s.uniform_modes
               ? static_cast<Mode>(std::uniform_int_distribution<int>(0, kNumModes - 1)(rng))
               : s.fixed_mode;
  switch (c.mode) {
    case Mode::kWalking: c.reference = Uniform(rng, s.walk_min, s.walk_max); break;
    case Mode::kStepping: c.reference = Uniform(rng, -s.turn_max, s.turn_max); break;
    case Mode::kStanding: c.reference = 0.0; break;
  }
  return c;
}

/// `field` is the height field generated once for the whole run.
inline EpisodeStart ResetEpisode(const EnvConfig& cfg, const HeightField& field, Rng& rng) {
  EpisodeStart e;
  e.mode = SampleMode(cfg.episode.sampling, rng);
  e.model = cfg.episode.randomize_dynamics
                ? RandomizeDynamics(cfg.model, cfg.randomization, rng)
                : cfg.model;
  e.terrain = (cfg.episode.terrain && !field.empty())
                  ? RandomizeTerrainOffset(field, cfg.terrain, rng)
                  : HeightField::Flat();
  e.clock = {0, cfg.episode.cycle_period};
  e.plant.q.setZero();
  e.plant.qd.setZero();
  e.plant.time = 0.0;
  JointVector q = cfg.model.NominalPosture();
  for (int j = 0; j < kNumJoints; ++j) {
    q[j] = std::clamp(q[j] + Uniform(rng, -cfg.episode.reset_noise, cfg.episode.reset_noise),
                      cfg.model.joints[j].lower, cfg.model.joints[j].upper);
  }
  e.plant.joints() = q;
  PlaceOnGround(e.plant, e.model, e.terrain);
  DrawKbemf(e.actuator, cfg.episode.bemf, rng);
  return e;
}

struct StepResult {
  double reward = 0.0;
  RewardBreakdown parts;
  Termination termination;
  FootSignals feet;
  // Sum over substeps and joints of (tau_pd - tau_applied)^2, and the count.
  double tracking_sq_sum = 0.0;
  int tracking_count = 0;
  bool done() const { return termination.status != StepStatus::kContinue; }
};

class LocomotionEnv {
 public:
  LocomotionEnv(EnvConfig cfg, HeightField field, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        field_(std::move(field)),
        rng_(seed),
        sim_(cfg_.model, HeightField::Flat(), cfg_.episode.solver),
        actuator_(cfg_.actuator, cfg_.episode.bemf, cfg_.episode.plant) {
    cfg_.Validate();
  }

  void Seed(std::uint64_t seed) { rng_.seed(seed); }

  const Observation& Reset() {
    EpisodeStart e = ResetEpisode(cfg_, field_, rng_);
    sim_.set_model(std::move(e.model));
    sim_.set_terrain(std::move(e.terrain));
    sim_.Reset(e.plant);
    actuator_.mutable_state() = e.actuator;
    mode_ = e.mode;
    clock_ = e.clock;
    step_ = 0;
    last_ = {};
    UpdateObservation();
    return observation_;
  }

  /// Replaces the active command; takes effect in the next observation.
  void SetCommand(const ModeCommand& c) {
    const std::string err = CommandError(c);
    if (!err.empty()) throw std::invalid_argument(err);
    mode_ = c;
    UpdateObservation();
  }

  /// Joint targets for a raw policy action.
  JointVector TargetPositions(const JointVector& action) const {
    JointVector q_des = cfg_.model.NominalPosture() + cfg_.episode.action_scale * action;
    for (int j = 0; j < kNumJoints; ++j) {
      q_des[j] = std::clamp(q_des[j], cfg_.model.joints[j].lower, cfg_.model.joints[j].upper);
    }
    return q_des;
  }

  const StepResult& Step(const JointVector& action) {
    if (!action.allFinite()) throw std::invalid_argument("action must be finite");
    const JointVector q_des = TargetPositions(action);
    const ClockState executed = clock_;
    StepResult r;
    const double dt = cfg_.episode.sim_dt;
    const int n = cfg_.episode.substeps;
    try {
      for (int k = 0; k < n; ++k) {
        const PlantState& s = sim_.state();
        const JointVector& tau =
            actuator_.Step(q_des, s.joints(), s.joint_velocities(), dt, rng_);
        const ContactResult& c = sim_.Step(tau, dt);
        r.feet.force_left += c.feet[0].normal;
        r.feet.force_right += c.feet[1].normal;
        const LinkFrames f(sim_.state(), sim_.model());
        const Vec2 center = sim_.model().FootCenter();
        r.feet.speed_left += f.PointVelocity(kFootLeft, center).norm();
        r.feet.speed_right += f.PointVelocity(kFootRight, center).norm();
        r.tracking_sq_sum +=
            (actuator_.state().tau_pd - actuator_.state().tau_applied).squaredNorm();
        r.tracking_count += kNumJoints;
      }
    } catch (const SimulationDiverged&) {
      actuator_.LatchObservation();
      clock_ = AdvancePhase(clock_);
      ++step_;
      r.termination = {StepStatus::kTerminated, TerminationReason::kDiverged};
      last_ = r;
      return last_;
    }
    r.feet.force_left /= n;
    r.feet.force_right /= n;
    r.feet.speed_left /= n;
    r.feet.speed_right /= n;
    actuator_.LatchObservation();

    const PlantState& s = sim_.state();
    const PeriodicReward periodic = RewardPeriodic(
        r.feet, executed, mode_, cfg_.gait, sim_.model().TotalMass() * kGravity);
    // No yaw in the sagittal plane.
    const TrackingReward tracking = RewardTracking(s.qd[kRootX], 0.0, mode_);
    const RegularizerReward reg = RewardRegularizers(s, sim_.model());
    r.parts = {periodic.grf, periodic.spd, tracking.rv,  tracking.av, RewardHeight(s.q[kRootZ]),
               reg.upper,    reg.posture,  reg.jv,       0.0};
    r.parts.total = TotalReward(r.parts, cfg_.weights);
    r.reward = r.parts.total;

    clock_ = AdvancePhase(clock_);
    ++step_;
    r.termination = CheckTermination(s, sim_.model(), cfg_.episode, step_);
    last_ = r;
    UpdateObservation();
    return last_;
  }

  const Observation& observation() const { return observation_; }
  const StepResult& last_step() const { return last_; }
  const PlantState& plant() const { return sim_.state(); }
  const ActuatorState& actuator() const { return actuator_.state(); }
  const ContactResult& contact() const { return sim_.contact(); }
  const RobotModel& model() const { return sim_.model(); }
  const HeightField& terrain() const { return sim_.terrain(); }
  const ModeCommand& command() const { return mode_; }
  const ClockState& clock() const { return clock_; }
  const EnvConfig& config() const { return cfg_; }
  int step_count() const { return step_; }

 private:
  void UpdateObservation() {
    observation_ = BuildObservation(sim_.state(), actuator_.state(), mode_, clock_,
                                    cfg_.episode.feedback);
  }

  EnvConfig cfg_;
  HeightField field_;
  Rng rng_;
  Simulator sim_;
  ActuatorChain actuator_;
  ModeCommand mode_;
  ClockState clock_;
  int step_ = 0;
  StepResult last_;
  Observation observation_ = Observation::Zero();
};

}  // namespace biped
