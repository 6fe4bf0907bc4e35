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

#include <array>
#include <cmath>

#include "biped/common.hpp"
#include "biped/sim/model.hpp"

namespace biped {

struct PlantState {
  DofVector q = DofVector::Zero();   // root x, root z, root pitch, joints
  DofVector qd = DofVector::Zero();
  double time = 0.0;

  auto joints() const { return q.segment<kNumJoints>(kFirstJoint); }
  auto joints() { return q.segment<kNumJoints>(kFirstJoint); }
  auto joint_velocities() const { return qd.segment<kNumJoints>(kFirstJoint); }
  auto joint_velocities() { return qd.segment<kNumJoints>(kFirstJoint); }

  bool AllFinite() const { return q.allFinite() && qd.allFinite() && std::isfinite(time); }
};

using PointJacobian = Eigen::Matrix<double, 2, kNumDofs>;

inline Vec2 Rotate(double angle, const Vec2& v) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

/// Derivative of a rotated vector with respect to its angle.
inline Vec2 Perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

/// Per-link world angles, angular rates and joint-pivot positions for one
/// state. Everything else (points, Jacobians, bias accelerations) derives
/// from this.
class LinkFrames {
 public:
  LinkFrames(const PlantState& s, const RobotModel& m) : model_(&m) {
    angle_[kTorso] = s.q[kRootPitch];
    cos_[kTorso] = std::cos(angle_[kTorso]);
    sin_[kTorso] = std::sin(angle_[kTorso]);
    rate_[kTorso] = s.qd[kRootPitch];
    origin_[kTorso] = s.q.head<2>();
    origin_vel_[kTorso] = s.qd.head<2>();
    for (int j = 0; j < kNumJoints; ++j) {
      const int link = ChildLink(j);
      const int parent = ParentLink(link);
      angle_[link] = angle_[parent] + s.q[kFirstJoint + j];
      cos_[link] = std::cos(angle_[link]);
      sin_[link] = std::sin(angle_[link]);
      rate_[link] = rate_[parent] + s.qd[kFirstJoint + j];
      const Vec2 offset = (parent == kTorso)
                              ? Vec2::Zero()
                              : Rot(parent, Vec2(0.0, -m.links[parent].length));
      origin_[link] = origin_[parent] + offset;
      origin_vel_[link] = origin_vel_[parent] + rate_[parent] * Perp(offset);
    }
  }

  double angle(int link) const { return angle_[link]; }
  double rate(int link) const { return rate_[link]; }
  const Vec2& origin(int link) const { return origin_[link]; }

  Vec2 Point(int link, const Vec2& local) const {
    return origin_[link] + Rot(link, local);
  }

  Vec2 PointVelocity(int link, const Vec2& local) const {
    return origin_vel_[link] + rate_[link] * Perp(Rot(link, local));
  }

  /// Linear Jacobian of a point fixed in `link`. Column for a rotational
  /// coordinate is perp(p - pivot) for every pivot on the path to the root.
  PointJacobian Jacobian(int link, const Vec2& local) const {
    PointJacobian J = PointJacobian::Zero();
    const Vec2 p = Point(link, local);
    J(0, kRootX) = 1.0;
    J(1, kRootZ) = 1.0;
    J.col(kRootPitch) = Perp(p - origin_[kTorso]);
    for (int l = link; l != kTorso; l = ParentLink(l)) {
      J.col(kFirstJoint + l - 1) = Perp(p - origin_[l]);
    }
    return J;
  }

  /// Angular Jacobian row of a link (0/1 entries in the planar case).
  DofVector AngularJacobian(int link) const {
    DofVector a = DofVector::Zero();
    a[kRootPitch] = 1.0;
    for (int l = link; l != kTorso; l = ParentLink(l)) a[kFirstJoint + l - 1] = 1.0;
    return a;
  }

  /// Point acceleration produced by velocities alone (J-dot times q-dot).
  Vec2 BiasAcceleration(int link, const Vec2& local) const {
    Vec2 acc = -rate_[link] * rate_[link] * Rot(link, local);
    for (int l = link; l != kTorso; l = ParentLink(l)) {
      const int parent = ParentLink(l);
      if (parent == kTorso) break;
      const Vec2 seg = Rot(parent, Vec2(0.0, -model_->links[parent].length));
      acc -= rate_[parent] * rate_[parent] * seg;
    }
    return acc;
  }

 private:
  // Rotation by the link's absolute angle, from the cached sin/cos.
  Vec2 Rot(int link, const Vec2& v) const {
    return {cos_[link] * v.x() - sin_[link] * v.y(), sin_[link] * v.x() + cos_[link] * v.y()};
  }

  const RobotModel* model_;
  std::array<double, kNumLinks> angle_{};
  std::array<double, kNumLinks> cos_{};
  std::array<double, kNumLinks> sin_{};
  std::array<double, kNumLinks> rate_{};
  std::array<Vec2, kNumLinks> origin_{};
  std::array<Vec2, kNumLinks> origin_vel_{};
};

struct BodyPose {
  Vec2 position = Vec2::Zero();  // sagittal x, z
  double lateral = 0.0;          // fixed y offset of the leg plane
  double angle = 0.0;
  Vec2 velocity = Vec2::Zero();
  double angular_velocity = 0.0;
};

struct BodyPoses {
  BodyPose root;
  BodyPose head;
  BodyPose left_foot;
  BodyPose right_foot;
  std::array<Vec2, kNumLinks> link_origins{};
  std::array<double, kNumLinks> link_angles{};
};

inline BodyPose MakePose(const LinkFrames& f, int link, const Vec2& local, double lateral) {
  BodyPose p;
  p.position = f.Point(link, local);
  p.velocity = f.PointVelocity(link, local);
  p.angle = f.angle(link);
  p.angular_velocity = f.rate(link);
  p.lateral = lateral;
  return p;
}

/// Root, head (top of the torso), and foot-center poses with velocities.
inline BodyPoses ForwardKinematics(const PlantState& s, const RobotModel& m) {
  const LinkFrames f(s, m);
  BodyPoses out;
  out.root = MakePose(f, kTorso, Vec2::Zero(), 0.0);
  out.head = MakePose(f, kTorso, Vec2(0.0, m.links[kTorso].length), 0.0);
  out.left_foot = MakePose(f, kFootLeft, m.FootCenter(), 0.5 * m.hip_width);
  out.right_foot = MakePose(f, kFootRight, m.FootCenter(), -0.5 * m.hip_width);
  for (int l = 0; l < kNumLinks; ++l) {
    out.link_origins[l] = f.origin(l);
    out.link_angles[l] = f.angle(l);
  }
  return out;
}

/// Euclidean distance between the two foot centers, including the fixed
/// lateral separation of the leg planes.
inline double FeetDistance(const PlantState& s, const RobotModel& m) {
  const LinkFrames f(s, m);
  const Vec2 d = f.Point(kFootLeft, m.FootCenter()) - f.Point(kFootRight, m.FootCenter());
  return std::sqrt(d.squaredNorm() + m.hip_width * m.hip_width);
}

}  // namespace biped
