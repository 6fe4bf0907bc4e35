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

// Policy input layout (28 entries, 0-based):
//   [0, 6)   joint positions, rad
//   [6, 12)  joint velocities / 10
//   12, 13   root roll (always 0 here), root pitch
//   14, 15   root roll rate (0), root pitch rate / 10
//   [16, 22) observed joint torque / 200
//   [22, 25) mode one-hot: walking, stepping, standing
//   25       mode reference
//   26, 27   clock sin, cos

#pragma once

#include "biped/actuator/actuator.hpp"
#include "biped/env/gait.hpp"
#include "biped/sim/kinematics.hpp"

namespace biped {

using Observation = Eigen::Matrix<double, kObservationSize, 1>;

namespace obs {
inline constexpr int kJointPos = 0;
inline constexpr int kJointVel = 6;
inline constexpr int kRoll = 12;
inline constexpr int kPitch = 13;
inline constexpr int kRollRate = 14;
inline constexpr int kPitchRate = 15;
inline constexpr int kTorque = 16;
inline constexpr int kMode = 22;
inline constexpr int kReference = 25;
inline constexpr int kClock = 26;

inline constexpr double kVelocityScale = 10.0;  // rad/s
inline constexpr double kTorqueScale = 200.0;   // N m
}  // namespace obs

inline Observation BuildObservation(const PlantState& s, const ActuatorState& act,
                                    const ModeCommand& mode, const ClockState& clock,
                                    bool feedback_enabled) {
  Observation o;
  o.segment<kNumJoints>(obs::kJointPos) = s.joints();
  o.segment<kNumJoints>(obs::kJointVel) = s.joint_velocities() / obs::kVelocityScale;
  o[obs::kRoll] = 0.0;
  o[obs::kPitch] = s.q[kRootPitch];
  o[obs::kRollRate] = 0.0;
  o[obs::kPitchRate] = s.qd[kRootPitch] / obs::kVelocityScale;
  if (feedback_enabled) {
    o.segment<kNumJoints>(obs::kTorque) = act.tau_obs / obs::kTorqueScale;
  } else {
    o.segment<kNumJoints>(obs::kTorque).setZero();
  }
  o.segment<3>(obs::kMode) = mode.OneHot();
  o[obs::kReference] = mode.reference;
  o.segment<2>(obs::kClock) = ClockSignal(clock);
  return o;
}

}  // namespace biped
