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

// Reward terms. Every exponential term is 1 at its target and decays toward
// 0; the periodic terms are signed sums of normalized foot quantities.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "biped/env/gait.hpp"
#include "biped/sim/kinematics.hpp"
#include "biped/sim/model.hpp"

namespace biped {

inline constexpr double kTargetRootHeight = 0.79;  // m

struct RewardWeights {
  // grf, spd, rv, av, height, upper, posture, jv
  std::array<double, 8> w = {0.225, 0.225, 0.100, 0.100, 0.050, 0.100, 0.100, 0.100};

  double Sum() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
  }

  void Validate() const {
    for (double v : w) {
      if (!(v >= 0.0)) throw ConfigError("reward.weights: all weights must be >= 0");
    }
  }
};

inline constexpr int kNumRewardTerms = 8;
inline constexpr std::array<const char*, kNumRewardTerms> kRewardTermNames = {
    "grf", "spd", "rv", "av", "height", "upper", "posture", "jv"};

struct RewardBreakdown {
  double grf = 0.0;
  double spd = 0.0;
  double rv = 0.0;
  double av = 0.0;
  double height = 0.0;
  double upper = 0.0;
  double posture = 0.0;
  double jv = 0.0;
  double total = 0.0;

  std::array<double, kNumRewardTerms> Terms() const { return {grf, spd, rv, av, height, upper, posture, jv}; }
};

/// Per-foot quantities averaged over one control step.
struct FootSignals {
  double force_left = 0.0;   // N, normal
  double force_right = 0.0;
  double speed_left = 0.0;   // m/s
  double speed_right = 0.0;
};

struct PeriodicReward {
  double grf = 0.0;
  double spd = 0.0;
};

inline PeriodicReward RewardPeriodic(const FootSignals& feet, const ClockState& clock,
                                     const ModeCommand& mode, const GaitSchedule& sched,
                                     double robot_weight) {
  const double force_scale = sched.force_scale > 0.0 ? sched.force_scale : robot_weight;
  const auto norm = [](double v, double scale) { return std::clamp(v / scale, 0.0, 1.0); };
  const FootCoefficients c = sched.Coefficients(clock.Fraction(), mode.mode);
  PeriodicReward r;
  r.grf = c.grf_left * norm(feet.force_left, force_scale) +
          c.grf_right * norm(feet.force_right, force_scale);
  r.spd = c.spd_left * norm(feet.speed_left, sched.speed_scale) +
          c.spd_right * norm(feet.speed_right, sched.speed_scale);
  return r;
}

struct TrackingReward {
  double rv = 0.0;
  double av = 0.0;
};

inline TrackingReward RewardTracking(double root_speed_x, double yaw_rate,
                                     const ModeCommand& mode) {
  // The plant has no yaw; the turning target is held at zero.
  constexpr double kTargetYawRate = 0.0;
  const double dv = root_speed_x - mode.TargetSpeed();
  const double dw = yaw_rate - kTargetYawRate;
  return {std::exp(-10.0 * dv * dv), std::exp(-10.0 * dw * dw)};
}

inline double RewardHeight(double root_height) {
  const double d = root_height - kTargetRootHeight;
  return std::exp(-40.0 * d * d);
}

struct RegularizerReward {
  double upper = 0.0;
  double posture = 0.0;
  double jv = 0.0;
};

inline double RewardUpper(double head_x, double root_x) {
  const double d = head_x - root_x;
  return std::exp(-10.0 * d * d);
}

inline double RewardPosture(const JointVector& q, const JointVector& q_nominal) {
  return std::exp(-(q - q_nominal).squaredNorm());
}

inline double RewardJointVelocity(const JointVector& qd, const JointVector& limits,
                                  double fraction = 0.5) {
  double sum = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    if (std::abs(qd[j]) > fraction * limits[j]) sum += qd[j] * qd[j];
  }
  return std::exp(-5e-6 * sum);
}

inline RegularizerReward RewardRegularizers(const PlantState& s, const RobotModel& m) {
  const BodyPoses poses = ForwardKinematics(s, m);
  return {RewardUpper(poses.head.position.x(), poses.root.position.x()),
          RewardPosture(s.joints(), m.NominalPosture()),
          RewardJointVelocity(s.joint_velocities(), m.VelocityLimits())};
}

inline double TotalReward(const RewardBreakdown& r, const RewardWeights& weights) {
  const auto t = r.Terms();
  double total = 0.0;
  for (int i = 0; i < 8; ++i) total += weights.w[i] * t[i];
  return total;
}

}  // namespace biped
