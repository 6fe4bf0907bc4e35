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

// Per-episode perturbation of link inertial parameters and joint friction.

#pragma once

#include "biped/config_file.hpp"
#include "biped/sim/model.hpp"

namespace biped {

struct DynamicsRandomization {
  double mass_fraction = 0.05;  // mass scaled by U[1 - f, 1 + f]
  double com_offset = 0.05;     // m, per axis
  double static_friction_low = 2.0;
  double static_friction_high = 8.0;
  double viscous_friction_low = 0.5;
  double viscous_friction_high = 5.0;

  void Validate() const {
    if (!(mass_fraction >= 0.0 && mass_fraction < 1.0)) {
      throw ConfigError("randomization.mass_fraction: must be in [0, 1)");
    }
    if (!(com_offset >= 0.0)) throw ConfigError("randomization.com_offset: must be >= 0");
    if (!(static_friction_low >= 0.0 && static_friction_low <= static_friction_high)) {
      throw ConfigError("randomization.static_friction: require 0 <= low <= high");
    }
    if (!(viscous_friction_low >= 0.0 && viscous_friction_low <= viscous_friction_high)) {
      throw ConfigError("randomization.viscous_friction: require 0 <= low <= high");
    }
  }
};

inline RobotModel RandomizeDynamics(const RobotModel& nominal, const DynamicsRandomization& r,
                                    Rng& rng) {
  RobotModel m = nominal;
  for (auto& link : m.links) {
    link.mass *= Uniform(rng, 1.0 - r.mass_fraction, 1.0 + r.mass_fraction);
    link.com.x() += Uniform(rng, -r.com_offset, r.com_offset);
    link.com.y() += Uniform(rng, -r.com_offset, r.com_offset);
  }
  for (auto& joint : m.joints) {
    joint.static_friction = Uniform(rng, r.static_friction_low, r.static_friction_high);
    joint.viscous_friction = Uniform(rng, r.viscous_friction_low, r.viscous_friction_high);
  }
  return m;
}

inline DynamicsRandomization LoadDynamicsRandomization(const KeyValueConfig& cfg) {
  DynamicsRandomization r;
  r.mass_fraction = cfg.GetDouble("randomization.mass_fraction", r.mass_fraction);
  r.com_offset = cfg.GetDouble("randomization.com_offset", r.com_offset);
  const auto range = [&](const std::string& key, double& low, double& high) {
    const auto v = cfg.GetDoubles(key, {low, high});
    if (v.size() != 2) throw ConfigError(key + ": expected two values (low high)");
    low = v[0];
    high = v[1];
  };
  range("randomization.static_friction", r.static_friction_low, r.static_friction_high);
  range("randomization.viscous_friction", r.viscous_friction_low, r.viscous_friction_high);
  r.Validate();
  return r;
}

}  // namespace biped
