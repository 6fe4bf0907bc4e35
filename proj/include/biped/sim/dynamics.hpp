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
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "biped/common.hpp"
#include "biped/sim/kinematics.hpp"
#include "biped/sim/model.hpp"
#include "biped/sim/terrain.hpp"

namespace biped {

enum class ContactSolver { kPenalty, kImpulse };

inline const char* ToString(ContactSolver s) {
  return s == ContactSolver::kPenalty ? "penalty" : "impulse";
}

inline ContactSolver ParseContactSolver(const std::string& s) {
  if (s == "penalty") return ContactSolver::kPenalty;
  if (s == "impulse") return ContactSolver::kImpulse;
  throw ConfigError("solver: expected 'penalty' or 'impulse', got '" + s + "'");
}

class SimulationDiverged : public std::runtime_error {
 public:
  explicit SimulationDiverged(const PlantState& s)
      : std::runtime_error(Describe(s)), state_(s) {}
  const PlantState& state() const { return state_; }

 private:
  static std::string Describe(const PlantState& s) {
    std::ostringstream os;
    os << "simulation diverged at t=" << s.time << " q=[" << s.q.transpose()
       << "] qd=[" << s.qd.transpose() << "]";
    return os.str();
  }
  PlantState state_;
};

// Contact points: heel and toe of each foot.
inline constexpr int kNumContactPoints = 4;
inline constexpr std::array<int, kNumContactPoints> kContactLink = {kFootLeft, kFootLeft,
                                                                    kFootRight, kFootRight};

inline Vec2 ContactLocal(const RobotModel& m, int point) {
  return (point % 2 == 0) ? m.heel : m.toe;
}

struct PointContact {
  double normal = 0.0;      // N, >= 0
  double tangential = 0.0;  // N, along +x
  double gap = 0.0;         // m, negative when penetrating
};

struct FootContact {
  double normal = 0.0;
  double tangential = 0.0;
  bool in_contact = false;
};

struct ContactResult {
  std::array<FootContact, 2> feet{};  // left, right
  std::array<PointContact, kNumContactPoints> points{};

  Vec2 TotalForce() const {
    Vec2 f = Vec2::Zero();
    for (const auto& p : points) f += Vec2(p.tangential, p.normal);
    return f;
  }
};

/// Tangential anchors for the penalty model's stick springs.
struct ContactMemory {
  std::array<double, kNumContactPoints> anchor{};
  std::array<bool, kNumContactPoints> active{};
};

struct SimOptions {
  double gravity = kGravity;
  bool contacts = true;
};

struct DynamicsTerms {
  DofMatrix mass = DofMatrix::Zero();
  DofVector bias = DofVector::Zero();  // Coriolis/centrifugal + gravity
};

/// Joint-space mass matrix (with rotor armature) and bias forces, so that
/// mass * qdd + bias = generalized forces.
inline DynamicsTerms ComputeDynamics(const LinkFrames& f, const RobotModel& m, double gravity) {
  DynamicsTerms d;
  const Vec2 g(0.0, -gravity);
  for (int b = 0; b < kNumLinks; ++b) {
    const auto& link = m.links[b];
    const PointJacobian J = f.Jacobian(b, link.com);
    const DofVector a = f.AngularJacobian(b);
    // Rank-2 and rank-1 updates; lazy products keep Eigen off its GEMM path.
    d.mass.noalias() += link.mass * J.transpose().lazyProduct(J);
    d.mass.noalias() += link.inertia * a.lazyProduct(a.transpose());
    d.bias.noalias() += J.transpose() * (link.mass * (f.BiasAcceleration(b, link.com) - g));
  }
  for (int j = 0; j < kNumJoints; ++j) {
    d.mass(kFirstJoint + j, kFirstJoint + j) += m.joints[j].armature;
  }
  return d;
}

inline DynamicsTerms ComputeDynamics(const PlantState& s, const RobotModel& m, double gravity) {
  return ComputeDynamics(LinkFrames(s, m), m, gravity);
}

/// Total linear momentum of the robot.
inline Vec2 LinearMomentum(const PlantState& s, const RobotModel& m) {
  const LinkFrames f(s, m);
  Vec2 p = Vec2::Zero();
  for (int b = 0; b < kNumLinks; ++b) {
    p += m.links[b].mass * f.PointVelocity(b, m.links[b].com);
  }
  return p;
}

inline Vec2 CenterOfMass(const PlantState& s, const RobotModel& m) {
  const LinkFrames f(s, m);
  Vec2 c = Vec2::Zero();
  for (int b = 0; b < kNumLinks; ++b) c += m.links[b].mass * f.Point(b, m.links[b].com);
  return c / m.TotalMass();
}

namespace detail {

// Smoothed stiction plus viscous friction and its velocity derivative.
inline void JointFriction(const RobotModel& m, const DofVector& qd, DofVector& torque,
                          DofVector& slope) {
  torque.setZero();
  slope.setZero();
  const double vs = m.contact.stiction_velocity;
  for (int j = 0; j < kNumJoints; ++j) {
    const double v = qd[kFirstJoint + j];
    const double th = std::tanh(v / vs);
    const auto& p = m.joints[j];
    torque[kFirstJoint + j] = p.static_friction * th + p.viscous_friction * v;
    slope[kFirstJoint + j] = p.static_friction * (1.0 - th * th) / vs + p.viscous_friction;
  }
}

inline void PenaltyContacts(const LinkFrames& f, const HeightField& terrain,
                            const RobotModel& m, ContactMemory& mem, ContactResult& out,
                            DofVector& generalized) {
  const auto& c = m.contact;
  for (int i = 0; i < kNumContactPoints; ++i) {
    const int link = kContactLink[i];
    const Vec2 local = ContactLocal(m, i);
    const Vec2 p = f.Point(link, local);
    const double gap = p.y() - terrain.GroundHeight(p.x());
    auto& pc = out.points[i];
    pc.gap = gap;
    if (gap >= 0.0) {
      mem.active[i] = false;
      continue;
    }
    const Vec2 v = f.PointVelocity(link, local);
    if (!mem.active[i]) {
      mem.active[i] = true;
      mem.anchor[i] = p.x();
    }
    const double fn = std::max(0.0, -c.stiffness * gap - c.damping * v.y());
    double ft = -c.tangential_stiffness * (p.x() - mem.anchor[i]) - c.tangential_damping * v.x();
    const double limit = c.friction * fn;
    if (std::abs(ft) > limit) {
      ft = std::copysign(limit, ft);
      // Slide the anchor so the spring sits on the cone boundary.
      mem.anchor[i] = p.x() + (ft + c.tangential_damping * v.x()) / c.tangential_stiffness;
    }
    pc.normal = fn;
    pc.tangential = ft;
    generalized.noalias() += f.Jacobian(link, local).transpose() * Vec2(ft, fn);
  }
}

// Velocity-level contact with Coulomb friction, solved by projected
// Gauss-Seidel on the Delassus operator. Returns the contact impulses.
inline void ImpulseContacts(const LinkFrames& f, const HeightField& terrain, const RobotModel& m,
                            const Eigen::LLT<DofMatrix>& effective_mass, double dt, DofVector& qd,
                            ContactResult& out) {
  constexpr double kSpeculativeMargin = 0.01;
  const auto& c = m.contact;
  int rows = 0;
  std::array<int, kNumContactPoints> ids{};
  Eigen::Matrix<double, 2 * kNumContactPoints, kNumDofs> J;
  Eigen::Matrix<double, 2 * kNumContactPoints, 1> target;
  for (int i = 0; i < kNumContactPoints; ++i) {
    const int link = kContactLink[i];
    const Vec2 local = ContactLocal(m, i);
    const Vec2 p = f.Point(link, local);
    const double gap = p.y() - terrain.GroundHeight(p.x());
    out.points[i].gap = gap;
    if (gap > kSpeculativeMargin) continue;
    const PointJacobian Ji = f.Jacobian(link, local);
    const int k = rows / 2;
    ids[k] = i;
    J.row(rows) = Ji.row(1);      // normal (z)
    J.row(rows + 1) = Ji.row(0);  // tangent (x)
    target[rows] = gap > 0.0 ? -gap / dt : -c.baumgarte * gap / dt;
    target[rows + 1] = 0.0;
    rows += 2;
  }
  if (rows == 0) return;
  const int n = rows;
  const Eigen::MatrixXd Jt = J.topRows(n).transpose();
  const Eigen::MatrixXd minv_jt = effective_mass.solve(Jt);
  const Eigen::MatrixXd W = J.topRows(n) * minv_jt;
  Eigen::VectorXd u = J.topRows(n) * qd;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < c.solver_iterations; ++it) {
    for (int r = 0; r < n; r += 2) {
      const double old_n = lambda[r];
      lambda[r] = std::max(0.0, old_n - (u[r] - target[r]) / W(r, r));
      u += W.col(r) * (lambda[r] - old_n);
      const double old_t = lambda[r + 1];
      const double lim = c.friction * lambda[r];
      lambda[r + 1] = std::clamp(old_t - u[r + 1] / W(r + 1, r + 1), -lim, lim);
      u += W.col(r + 1) * (lambda[r + 1] - old_t);
    }
  }
  // Normal updates late in the sweep may shrink the cone; project once more.
  for (int r = 0; r < n; r += 2) {
    const double lim = c.friction * lambda[r];
    lambda[r + 1] = std::clamp(lambda[r + 1], -lim, lim);
  }
  qd.noalias() += minv_jt * lambda;
  for (int r = 0; r < n; r += 2) {
    auto& pc = out.points[ids[r / 2]];
    pc.normal = lambda[r] / dt;
    const double lim = c.friction * pc.normal;
    pc.tangential = std::clamp(lambda[r + 1] / dt, -lim, lim);
  }
}

inline void Summarize(ContactResult& out) {
  for (int foot = 0; foot < 2; ++foot) {
    auto& fc = out.feet[foot];
    fc.normal = out.points[2 * foot].normal + out.points[2 * foot + 1].normal;
    fc.tangential = out.points[2 * foot].tangential + out.points[2 * foot + 1].tangential;
    fc.in_contact = fc.normal > 0.0;
  }
}

}  // namespace detail

/// Advances the plant by one semi-implicit Euler step. Joint friction is
/// integrated linearly-implicitly; root translation is updated from the
/// discrete linear-momentum balance so internal forces never change the
/// robot's momentum.
inline ContactResult StepDynamics(PlantState& s, ContactMemory& mem, const JointVector& torques,
                                  const HeightField& terrain, const RobotModel& m, double dt,
                                  ContactSolver solver, const SimOptions& opt = {}) {
  if (!(dt > 0.0 && dt <= 0.002)) throw std::invalid_argument("StepDynamics: dt must be in (0, 2ms]");
  if (!torques.allFinite()) throw std::invalid_argument("StepDynamics: non-finite torque");

  const LinkFrames f(s, m);
  const DynamicsTerms dyn = ComputeDynamics(f, m, opt.gravity);
  ContactResult contact;

  DofVector generalized = DofVector::Zero();
  generalized.tail<kNumJoints>() = torques;
  if (opt.contacts && solver == ContactSolver::kPenalty) {
    detail::PenaltyContacts(f, terrain, m, mem, contact, generalized);
  }

  DofVector friction, slope;
  detail::JointFriction(m, s.qd, friction, slope);
  DofMatrix effective = dyn.mass;
  effective.diagonal() += dt * slope;
  const Eigen::LLT<DofMatrix> llt(effective);

  DofVector qd_next = s.qd + llt.solve(dt * (generalized - dyn.bias - friction));
  if (opt.contacts && solver == ContactSolver::kImpulse) {
    detail::ImpulseContacts(f, terrain, m, llt, dt, qd_next, contact);
  }
  detail::Summarize(contact);

  // Momentum balance uses the external forces only.
  const Vec2 momentum = dyn.mass.topRows<2>() * s.qd;
  const Vec2 external = Vec2(0.0, -opt.gravity * m.TotalMass()) + contact.TotalForce();
  const Vec2 momentum_next = momentum + dt * external;

  // Rotational coordinates first.
  s.qd.tail<kNumDofs - 2>() = qd_next.tail<kNumDofs - 2>();
  s.q.tail<kNumDofs - 2>() += dt * s.qd.tail<kNumDofs - 2>();
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& p = m.joints[j];
    double& q = s.q[kFirstJoint + j];
    double& v = s.qd[kFirstJoint + j];
    if (q > p.upper) {
      q = p.upper;
      v = std::min(v, 0.0);
    } else if (q < p.lower) {
      q = p.lower;
      v = std::max(v, 0.0);
    }
  }

  // Root translation from momentum at the new configuration.
  const LinkFrames f_next(s, m);
  Vec2 internal = Vec2::Zero();
  for (int b = 0; b < kNumLinks; ++b) {
    const PointJacobian J = f_next.Jacobian(b, m.links[b].com);
    internal += m.links[b].mass * (J.rightCols<kNumDofs - 2>() * s.qd.tail<kNumDofs - 2>());
  }
  s.qd.head<2>() = (momentum_next - internal) / m.TotalMass();
  s.q.head<2>() += dt * s.qd.head<2>();
  s.time += dt;

  constexpr double kBlowup = 1e6;
  if (!s.AllFinite() || s.qd.cwiseAbs().maxCoeff() > kBlowup) throw SimulationDiverged(s);
  return contact;
}

/// Owns the plant state and contact memory for one simulated robot.
class Simulator {
 public:
  Simulator(RobotModel model, HeightField terrain, ContactSolver solver, SimOptions options = {})
      : model_(std::move(model)), terrain_(std::move(terrain)), solver_(solver), options_(options) {}

  void Reset(const PlantState& s) {
    state_ = s;
    memory_ = {};
  }

  const ContactResult& Step(const JointVector& torques, double dt) {
    contact_ = StepDynamics(state_, memory_, torques, terrain_, model_, dt, solver_, options_);
    return contact_;
  }

  const PlantState& state() const { return state_; }
  const RobotModel& model() const { return model_; }
  const HeightField& terrain() const { return terrain_; }
  const ContactResult& contact() const { return contact_; }
  ContactSolver solver() const { return solver_; }

  void set_model(RobotModel m) { model_ = std::move(m); }
  void set_terrain(HeightField t) { terrain_ = std::move(t); }
  void set_solver(ContactSolver s) { solver_ = s; }

 private:
  RobotModel model_;
  HeightField terrain_;
  ContactSolver solver_;
  SimOptions options_;
  PlantState state_;
  ContactMemory memory_;
  ContactResult contact_;
};

/// Places the robot so its lowest contact point touches the ground.
inline void PlaceOnGround(PlantState& s, const RobotModel& m, const HeightField& terrain,
                          double penetration = 0.0) {
  const LinkFrames f(s, m);
  double lift = -1e9;
  for (int i = 0; i < kNumContactPoints; ++i) {
    const Vec2 p = f.Point(kContactLink[i], ContactLocal(m, i));
    lift = std::max(lift, terrain.GroundHeight(p.x()) - p.y());
  }
  s.q[kRootZ] += lift - penetration;
}

}  // namespace biped
