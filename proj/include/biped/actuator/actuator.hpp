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

// Per-joint motor pipeline. The PD law produces a desired torque; the
// training plant degrades it with a velocity-proportional counter-torque,
// while the real-analog plant tracks it through a PI current loop driving an
// algebraic DC-motor model with back-EMF.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "biped/common.hpp"
#include "biped/config_file.hpp"

namespace biped {

enum class PlantKind { kTraining, kRealAnalog };

inline const char* ToString(PlantKind p) {
  return p == PlantKind::kTraining ? "training" : "real-analog";
}

inline PlantKind ParsePlantKind(const std::string& s) {
  if (s == "training") return PlantKind::kTraining;
  if (s == "real-analog") return PlantKind::kRealAnalog;
  throw ConfigError("plant: expected 'training' or 'real-analog', got '" + s + "'");
}

struct ActuatorParams {
  JointVector kp = JointVector::Constant(120.0);  // N m / rad
  JointVector kd = JointVector::Constant(6.0);    // N m s / rad
  double torque_constant = 0.05;     // N m / A, motor side
  double gear_ratio = 100.0;
  double resistance = 0.5;           // ohm
  double back_emf_constant = 0.05;   // V s / rad, motor side
  double current_kp = 0.25;          // V / A
  double current_ki = 20.0;          // V / (A s)
  double voltage_limit = 48.0;       // V

  /// Joint torque per ampere of motor current.
  double TorquePerAmp() const { return gear_ratio * torque_constant; }

  void Validate() const {
    if (!((kp.array() > 0.0).all())) throw ConfigError("actuator.kp: must be > 0");
    if (!((kd.array() > 0.0).all())) throw ConfigError("actuator.kd: must be > 0");
    if (!(torque_constant > 0.0)) throw ConfigError("actuator.torque_constant: must be > 0");
    if (!(gear_ratio > 0.0)) throw ConfigError("actuator.gear_ratio: must be > 0");
    if (!(resistance > 0.0)) throw ConfigError("actuator.resistance: must be > 0");
    if (!(voltage_limit > 0.0)) throw ConfigError("actuator.voltage_limit: must be > 0");
    if (!(back_emf_constant >= 0.0)) throw ConfigError("actuator.back_emf_constant: must be >= 0");
    if (!(current_ki >= 0.0)) throw ConfigError("actuator.current_ki: must be >= 0");
    if (!(current_kp >= 0.0)) throw ConfigError("actuator.current_kp: must be >= 0");
  }
};

struct BemfConfig {
  bool enabled = true;
  double low = 5.0;    // N m s / rad
  double high = 40.0;  // N m s / rad
  double interval_ms = 100.0;

  void Validate() const {
    if (!(low >= 0.0 && low <= high)) throw ConfigError("bemf: require 0 <= low <= high");
    if (!(interval_ms > 0.0)) throw ConfigError("bemf.interval_ms: must be > 0");
  }
};

struct ActuatorState {
  JointVector tau_pd = JointVector::Zero();
  JointVector tau_applied = JointVector::Zero();
  JointVector tau_obs = JointVector::Zero();
  JointVector k_bemf = JointVector::Zero();
  JointVector current = JointVector::Zero();      // measured, A
  JointVector tau_motor = JointVector::Zero();    // motor-side torque, N m
  JointVector integrator = JointVector::Zero();   // A s
  std::int64_t us_since_resample = 0;
};

inline double PdTorque(double q_des, double q, double qd, double kp, double kd) {
  return kp * (q_des - q) + kd * (0.0 - qd);
}

inline JointVector PdTorque(const JointVector& q_des, const JointVector& q, const JointVector& qd,
                            const ActuatorParams& p) {
  return p.kp.cwiseProduct(q_des - q) - p.kd.cwiseProduct(qd);
}

inline double ApplyBemf(double tau_pd, double qd, double k_bemf) { return tau_pd - k_bemf * qd; }

inline JointVector ApplyBemf(const JointVector& tau_pd, const JointVector& qd,
                             const JointVector& k_bemf) {
  return tau_pd - k_bemf.cwiseProduct(qd);
}

/// Redraws every joint's counter-torque coefficient on each multiple of the
/// resample interval. `elapsed_us` is the time since the last call.
inline void ResampleKbemf(ActuatorState& s, const BemfConfig& cfg, std::int64_t elapsed_us,
                          Rng& rng) {
  if (!cfg.enabled) {
    s.k_bemf.setZero();
    return;
  }
  const auto interval = static_cast<std::int64_t>(std::llround(cfg.interval_ms * 1000.0));
  s.us_since_resample += elapsed_us;
  while (s.us_since_resample >= interval) {
    s.us_since_resample -= interval;
    for (int j = 0; j < kNumJoints; ++j) s.k_bemf[j] = Uniform(rng, cfg.low, cfg.high);
  }
}

inline void DrawKbemf(ActuatorState& s, const BemfConfig& cfg, Rng& rng) {
  s.us_since_resample = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    s.k_bemf[j] = cfg.enabled ? Uniform(rng, cfg.low, cfg.high) : 0.0;
  }
}

/// One inner-loop period of the PI current controller and motor. Returns the
/// joint torque delivered to the link.
inline double PiCurrentStep(double tau_desired, double qd, int joint, ActuatorState& s,
                            const ActuatorParams& p, double dt) {
  const double i_des = tau_desired / p.TorquePerAmp();
  const double error = i_des - s.current[joint];
  const double unclamped = p.current_kp * error + p.current_ki * (s.integrator[joint] + dt * error);
  const double voltage = std::clamp(unclamped, -p.voltage_limit, p.voltage_limit);
  // Anti-windup: integrate only while the output is not saturated.
  if (voltage == unclamped) s.integrator[joint] += dt * error;
  const double back_emf = p.back_emf_constant * p.gear_ratio * qd;
  s.current[joint] = (voltage - back_emf) / p.resistance;
  s.tau_motor[joint] = p.torque_constant * s.current[joint];
  return p.gear_ratio * s.tau_motor[joint];
}

/// Torque signal presented to the policy: the previously applied torque in
/// the training plant, or the current-sensor reading scaled to joint space.
inline JointVector TorqueObservation(const ActuatorState& s, const ActuatorParams& p,
                                     PlantKind plant) {
  if (plant == PlantKind::kTraining) return s.tau_applied;
  JointVector out;
  for (int j = 0; j < kNumJoints; ++j) {
    const double tau_mot = s.current[j] * p.torque_constant;
    out[j] = p.gear_ratio * tau_mot;
  }
  return out;
}

class ActuatorChain {
 public:
  ActuatorChain(ActuatorParams params, BemfConfig bemf, PlantKind plant)
      : params_(std::move(params)), bemf_(bemf), plant_(plant) {}

  void Reset(Rng& rng) {
    state_ = ActuatorState{};
    DrawKbemf(state_, bemf_, rng);
  }

  /// One inner (physics) step: PD law followed by the plant's torque path.
  const JointVector& Step(const JointVector& q_des, const JointVector& q, const JointVector& qd,
                          double dt, Rng& rng) {
    state_.tau_pd = PdTorque(q_des, q, qd, params_);
    if (plant_ == PlantKind::kTraining) {
      state_.tau_applied = ApplyBemf(state_.tau_pd, qd, state_.k_bemf);
    } else {
      for (int j = 0; j < kNumJoints; ++j) {
        state_.tau_applied[j] = PiCurrentStep(state_.tau_pd[j], qd[j], j, state_, params_, dt);
      }
    }
    // The coefficient used this step stays fixed; the next one may change.
    if (plant_ == PlantKind::kTraining) {
      ResampleKbemf(state_, bemf_, std::llround(dt * 1e6), rng);
    }
    return state_.tau_applied;
  }

  /// Called at the end of a control step.
  void LatchObservation() { state_.tau_obs = TorqueObservation(state_, params_, plant_); }

  const ActuatorState& state() const { return state_; }
  ActuatorState& mutable_state() { return state_; }
  const ActuatorParams& params() const { return params_; }
  const BemfConfig& bemf() const { return bemf_; }
  PlantKind plant() const { return plant_; }

 private:
  ActuatorParams params_;
  BemfConfig bemf_;
  PlantKind plant_;
  ActuatorState state_;
};

inline ActuatorParams LoadActuatorParams(const KeyValueConfig& cfg) {
  ActuatorParams p;
  const auto per_joint = [&](const std::string& key, JointVector& out) {
    const auto v = cfg.GetDoubles(key, {});
    if (v.empty()) return;
    if (v.size() == 1) {
      out.setConstant(v[0]);
    } else if (v.size() == kNumJoints) {
      for (int j = 0; j < kNumJoints; ++j) out[j] = v[j];
    } else {
      throw ConfigError(key + ": expected 1 or 6 values");
    }
  };
  per_joint("actuator.kp", p.kp);
  per_joint("actuator.kd", p.kd);
  p.torque_constant = cfg.GetDouble("actuator.torque_constant", p.torque_constant);
  p.gear_ratio = cfg.GetDouble("actuator.gear_ratio", p.gear_ratio);
  p.resistance = cfg.GetDouble("actuator.resistance", p.resistance);
  p.back_emf_constant = cfg.GetDouble("actuator.back_emf_constant", p.back_emf_constant);
  p.current_kp = cfg.GetDouble("actuator.current_kp", p.current_kp);
  p.current_ki = cfg.GetDouble("actuator.current_ki", p.current_ki);
  p.voltage_limit = cfg.GetDouble("actuator.voltage_limit", p.voltage_limit);
  p.Validate();
  return p;
}

inline BemfConfig LoadBemfConfig(const KeyValueConfig& cfg) {
  BemfConfig b;
  b.enabled = cfg.GetBool("bemf.enabled", b.enabled);
  b.low = cfg.GetDouble("bemf.low", b.low);
  b.high = cfg.GetDouble("bemf.high", b.high);
  b.interval_ms = cfg.GetDouble("bemf.interval_ms", b.interval_ms);
  b.Validate();
  return b;
}

}  // namespace biped
