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

// Planar 7-link biped: a torso (floating root) and two legs of thigh, shank
// and foot. Angles are counter-clockwise in the x-z plane (x forward, z up),
// so a positive hip angle swings the thigh forward and a positive root pitch
// leans the torso backward.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "biped/common.hpp"
#include "biped/config_file.hpp"

namespace biped {

enum Link : int {
  kTorso = 0,
  kThighLeft = 1,
  kShankLeft = 2,
  kFootLeft = 3,
  kThighRight = 4,
  kShankRight = 5,
  kFootRight = 6,
};

enum Joint : int {
  kHipLeft = 0,
  kKneeLeft = 1,
  kAnkleLeft = 2,
  kHipRight = 3,
  kKneeRight = 4,
  kAnkleRight = 5,
};

inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r"};
inline constexpr std::array<const char*, kNumLinks> kLinkNames = {
    "torso", "thigh_l", "shank_l", "foot_l", "thigh_r", "shank_r", "foot_r"};

/// Joint j drives link j + 1. The parent of a leg link is the previous link
/// of the same leg, or the torso for thighs.
constexpr int ChildLink(int joint) { return joint + 1; }
constexpr int ParentLink(int link) {
  return (link == kThighLeft || link == kThighRight) ? kTorso : link - 1;
}
constexpr bool IsLeftJoint(int joint) { return joint < 3; }
constexpr int MirrorJoint(int joint) { return joint < 3 ? joint + 3 : joint - 3; }

struct LinkParams {
  double mass = 1.0;      // kg
  Vec2 com = Vec2::Zero();  // m, link frame
  double inertia = 0.01;  // kg m^2 about the CoM
  double length = 0.0;    // m; torso: pelvis to head, leg links: joint to child joint
};

struct JointParams {
  double lower = -1.0;           // rad
  double upper = 1.0;            // rad
  double velocity_limit = 10.0;  // rad/s
  double nominal = 0.0;          // rad
  double static_friction = 5.0;  // N m
  double viscous_friction = 2.75;  // N m s / rad
  double armature = 0.08;        // kg m^2, reflected rotor inertia
};

struct ContactParams {
  double stiffness = 1e5;             // N/m
  double damping = 1e3;               // N s/m
  double tangential_stiffness = 1e5;  // N/m
  double tangential_damping = 1e3;    // N s/m
  double friction = 0.8;
  // Penalty friction is clamped to the cone, so the documented slack is zero.
  double cone_slack = 0.0;
  double baumgarte = 0.2;             // impulse solver position correction
  int solver_iterations = 60;
  // Stiction smoothing for joint friction (tanh velocity scale).
  double stiction_velocity = 0.01;    // rad/s
};

struct RobotModel {
  std::array<LinkParams, kNumLinks> links{};
  std::array<JointParams, kNumJoints> joints{};
  Vec2 heel{-0.08, -0.06};  // foot frame
  Vec2 toe{0.14, -0.06};
  double hip_width = 0.25;  // lateral separation of the two legs
  ContactParams contact{};

  double TotalMass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  JointVector NominalPosture() const {
    JointVector q;
    for (int j = 0; j < kNumJoints; ++j) q[j] = joints[j].nominal;
    return q;
  }

  JointVector VelocityLimits() const {
    JointVector v;
    for (int j = 0; j < kNumJoints; ++j) v[j] = joints[j].velocity_limit;
    return v;
  }

  Vec2 FootCenter() const { return 0.5 * (heel + toe); }

  void Validate() const {
    for (int i = 0; i < kNumLinks; ++i) {
      const std::string name = std::string("link.") + kLinkNames[i];
      if (!(links[i].mass > 0.0)) throw ConfigError(name + ".mass: must be > 0");
      if (!(links[i].inertia > 0.0)) throw ConfigError(name + ".inertia: must be > 0");
      if (!(links[i].length >= 0.0)) throw ConfigError(name + ".length: must be >= 0");
    }
    for (int j = 0; j < kNumJoints; ++j) {
      const auto& p = joints[j];
      const std::string name = std::string("joint.") + kJointNames[j];
      if (!(p.lower < p.upper)) throw ConfigError(name + ": lower limit must be < upper");
      if (!(p.velocity_limit > 0.0)) throw ConfigError(name + ".velocity_limit: must be > 0");
      if (p.nominal < p.lower || p.nominal > p.upper) {
        throw ConfigError(name + ".nominal: outside joint limits");
      }
      if (p.static_friction < 0.0 || p.viscous_friction < 0.0) {
        throw ConfigError(name + ": friction must be >= 0");
      }
      if (p.armature < 0.0) throw ConfigError(name + ".armature: must be >= 0");
    }
    if (!(contact.stiffness > 0.0 && contact.damping >= 0.0)) {
      throw ConfigError("contact: stiffness must be > 0 and damping >= 0");
    }
    if (!(contact.friction >= 0.0)) throw ConfigError("contact.friction: must be >= 0");
    if (!(contact.stiction_velocity > 0.0)) {
      throw ConfigError("contact.stiction_velocity: must be > 0");
    }
    if (!(hip_width >= 0.0)) throw ConfigError("geometry.hip_width: must be >= 0");
  }
};

/// 50 kg biped whose pelvis sits at 0.79 m in the nominal posture on flat
/// ground (2 * 0.38 * cos(0.28) + 0.06).
inline RobotModel DefaultRobotModel() {
  RobotModel m;
  m.links[kTorso] = {30.0, Vec2(0.0, 0.25), 1.5, 0.6};
  for (int side = 0; side < 2; ++side) {
    const int base = side * 3;
    m.links[kThighLeft + base] = {5.5, Vec2(0.0, -0.19), 0.066, 0.38};
    m.links[kShankLeft + base] = {3.0, Vec2(0.0, -0.19), 0.036, 0.38};
    m.links[kFootLeft + base] = {1.5, Vec2(0.03, -0.03), 0.006, 0.0};
    m.joints[kHipLeft + base] = {-1.0, 1.6, 10.0, 0.28, 5.0, 2.75, 0.08};
    m.joints[kKneeLeft + base] = {-2.4, 0.0, 10.0, -0.56, 5.0, 2.75, 0.08};
    m.joints[kAnkleLeft + base] = {-0.9, 0.9, 10.0, 0.28, 5.0, 2.75, 0.08};
  }
  return m;
}

namespace detail {

inline Vec2 ReadVec2(const KeyValueConfig& cfg, const std::string& key, const Vec2& fallback) {
  const auto v = cfg.GetDoubles(key, {fallback.x(), fallback.y()});
  if (v.size() != 2) throw ConfigError(key + ": expected two numbers");
  return Vec2(v[0], v[1]);
}

inline const char* SegmentName(int link) {
  switch (link) {
    case kTorso: return "torso";
    case kThighLeft: case kThighRight: return "thigh";
    case kShankLeft: case kShankRight: return "shank";
    default: return "foot";
  }
}

inline const char* JointKind(int joint) {
  switch (joint % 3) {
    case 0: return "hip";
    case 1: return "knee";
    default: return "ankle";
  }
}

}  // namespace detail

/// Reads the robot description. Leg sections ([link.thigh], [joint.knee], ...)
/// apply to both legs; absent keys keep the default model's value.
inline RobotModel LoadRobotModel(const KeyValueConfig& cfg) {
  RobotModel m = DefaultRobotModel();
  for (int i = 0; i < kNumLinks; ++i) {
    const std::string s = std::string("link.") + detail::SegmentName(i) + ".";
    auto& l = m.links[i];
    l.mass = cfg.GetDouble(s + "mass", l.mass);
    l.com = detail::ReadVec2(cfg, s + "com", l.com);
    l.inertia = cfg.GetDouble(s + "inertia", l.inertia);
    l.length = cfg.GetDouble(s + "length", l.length);
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const std::string s = std::string("joint.") + detail::JointKind(j) + ".";
    auto& p = m.joints[j];
    p.lower = cfg.GetDouble(s + "lower", p.lower);
    p.upper = cfg.GetDouble(s + "upper", p.upper);
    p.velocity_limit = cfg.GetDouble(s + "velocity_limit", p.velocity_limit);
    p.nominal = cfg.GetDouble(s + "nominal", p.nominal);
    p.static_friction = cfg.GetDouble(s + "static_friction", p.static_friction);
    p.viscous_friction = cfg.GetDouble(s + "viscous_friction", p.viscous_friction);
    p.armature = cfg.GetDouble(s + "armature", p.armature);
  }
  m.heel = detail::ReadVec2(cfg, "foot.heel", m.heel);
  m.toe = detail::ReadVec2(cfg, "foot.toe", m.toe);
  m.hip_width = cfg.GetDouble("geometry.hip_width", m.hip_width);
  auto& c = m.contact;
  c.stiffness = cfg.GetDouble("contact.stiffness", c.stiffness);
  c.damping = cfg.GetDouble("contact.damping", c.damping);
  c.tangential_stiffness = cfg.GetDouble("contact.tangential_stiffness", c.tangential_stiffness);
  c.tangential_damping = cfg.GetDouble("contact.tangential_damping", c.tangential_damping);
  c.friction = cfg.GetDouble("contact.friction", c.friction);
  c.baumgarte = cfg.GetDouble("contact.baumgarte", c.baumgarte);
  c.solver_iterations = static_cast<int>(cfg.GetInt("contact.solver_iterations", c.solver_iterations));
  c.stiction_velocity = cfg.GetDouble("contact.stiction_velocity", c.stiction_velocity);
  m.Validate();
  return m;
}

}  // namespace biped
