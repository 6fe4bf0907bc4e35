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

// Measures the effective counter-torque slope of the current-loop plant:
// hold a joint at a constant speed under a constant torque demand and read
// (tau_desired - tau_applied) / qd after a given settling time. This is how
// the real-analog parameters were checked against the training range.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "biped/actuator/actuator.hpp"

namespace biped {

struct SlopeSample {
  double velocity = 0.0;  // rad/s
  double settle = 0.0;    // s after the speed step
  double slope = 0.0;     // N m s / rad
  bool saturated = false;
};

/// Slope after `settle` seconds at constant `velocity`, starting from the
/// loop's stall steady state for `tau_desired`.
inline SlopeSample MeasureCounterTorqueSlope(const ActuatorParams& p, double tau_desired,
                                             double velocity, double settle, double dt = 1e-3) {
  ActuatorState s;
  // Settle at stall first so the integrator starts from its static value.
  for (int k = 0; k < 2000; ++k) PiCurrentStep(tau_desired, 0.0, 0, s, p, dt);
  double applied = 0.0;
  const int steps = static_cast<int>(std::lround(settle / dt));
  for (int k = 0; k < std::max(1, steps); ++k) {
    applied = PiCurrentStep(tau_desired, velocity, 0, s, p, dt);
  }
  SlopeSample out;
  out.velocity = velocity;
  out.settle = settle;
  out.slope = (tau_desired - applied) / velocity;
  // Terminal voltage of the last tick, recovered from the motor equation.
  const double v = s.current[0] * p.resistance + p.back_emf_constant * p.gear_ratio * velocity;
  out.saturated = std::abs(v) >= p.voltage_limit * (1.0 - 1e-12);
  return out;
}

inline std::vector<SlopeSample> CounterTorqueSweep(const ActuatorParams& p, double tau_desired,
                                                   const std::vector<double>& velocities,
                                                   const std::vector<double>& settles) {
  std::vector<SlopeSample> out;
  for (double s : settles) {
    for (double v : velocities) out.push_back(MeasureCounterTorqueSlope(p, tau_desired, v, s));
  }
  return out;
}

}  // namespace biped
