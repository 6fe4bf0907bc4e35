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

// Left/right mirror maps for observations and actions, and the auxiliary
// symmetry loss built on them.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "biped/env/observation.hpp"
#include "biped/nn/policy.hpp"
#include "biped/sim/model.hpp"

namespace biped::ppo {

using nn::Matrix;
using nn::Vector;

/// y[i] = sign[i] * x[perm[i]].
struct SignedPermutation {
  std::vector<int> perm;
  std::vector<double> sign;

  int size() const { return static_cast<int>(perm.size()); }

  static SignedPermutation Identity(int n) {
    SignedPermutation p;
    p.perm.resize(n);
    p.sign.assign(n, 1.0);
    for (int i = 0; i < n; ++i) p.perm[i] = i;
    return p;
  }

  /// Applying the map twice gives the identity.
  bool IsInvolution() const {
    for (int i = 0; i < size(); ++i) {
      const int j = perm[i];
      if (j < 0 || j >= size() || perm[j] != i || sign[i] * sign[j] != 1.0) return false;
    }
    return true;
  }

  template <typename Derived>
  Matrix<typename Derived::Scalar> Apply(const Eigen::MatrixBase<Derived>& x) const {
    using S = typename Derived::Scalar;
    Matrix<S> y(x.rows(), x.cols());
    for (int i = 0; i < size(); ++i) y.row(i) = static_cast<S>(sign[i]) * x.row(perm[i]);
    return y;
  }

  /// Block-diagonal repetition, for stacked observation histories.
  SignedPermutation Repeat(int times) const {
    SignedPermutation r;
    for (int k = 0; k < times; ++k) {
      for (int i = 0; i < size(); ++i) {
        r.perm.push_back(perm[i] + k * size());
        r.sign.push_back(sign[i]);
      }
    }
    return r;
  }
};

/// Joint index of the opposite-side counterpart, found by swapping the
/// "_l"/"_r" suffix of the joint name.
inline int MirrorJointByName(int j) {
  std::string name = kJointNames[j];
  const char side = name.back();
  name.back() = side == 'l' ? 'r' : 'l';
  for (int k = 0; k < kNumJoints; ++k) {
    if (name == kJointNames[k]) return k;
  }
  throw ConfigError("joint '" + std::string(kJointNames[j]) + "' has no mirror counterpart");
}

struct MirrorSpec {
  SignedPermutation observation;  // over the policy input (history-stacked)
  SignedPermutation action;
  int phase_shift = 0;  // control steps; the clock entries encode it as a sign flip

  bool IsInvolution() const {
    return observation.IsInvolution() && action.IsInvolution() && phase_shift >= 0;
  }

  /// Mirror maps for the observation layout in observation.hpp. Legs swap;
  /// sagittal quantities keep their sign and roll-like ones flip. Shifting
  /// the clock by half a cycle maps (sin, cos) to (-sin, -cos).
  static MirrorSpec ForLayout(int cycle_period, int history = 1) {
    SignedPermutation o = SignedPermutation::Identity(kObservationSize);
    SignedPermutation a = SignedPermutation::Identity(kActionSize);
    for (int j = 0; j < kNumJoints; ++j) {
      const int m = MirrorJointByName(j);
      a.perm[j] = m;
      o.perm[obs::kJointPos + j] = obs::kJointPos + m;
      o.perm[obs::kJointVel + j] = obs::kJointVel + m;
      o.perm[obs::kTorque + j] = obs::kTorque + m;
    }
    o.sign[obs::kRoll] = -1.0;
    o.sign[obs::kRollRate] = -1.0;
    o.sign[obs::kClock] = -1.0;
    o.sign[obs::kClock + 1] = -1.0;
    MirrorSpec s;
    s.observation = history > 1 ? o.Repeat(history) : o;
    s.action = a;
    s.phase_shift = cycle_period / 2;
    return s;
  }
};

/// Symmetry loss mean_b ||M_a(pi(o_b)) - pi(M_o(o_b))||^2 over the actor
/// means, for a sequence of inputs starting from a zero carry. `mask`, when
/// non-empty, weights each (step, column) and the mean runs over its sum.
/// Adds weight * dL/dparams into `grad` when non-null.
template <typename S>
double SymmetryLoss(const nn::ActorCritic<S>& net, const MirrorSpec& mirror,
                    const std::vector<Matrix<S>>& xs,
                    const std::vector<Eigen::Matrix<S, 1, Eigen::Dynamic>>& mask, double weight,
                    Vector<S>* grad) {
  const int batch = static_cast<int>(xs.front().cols());
  std::vector<Matrix<S>> mirrored;
  mirrored.reserve(xs.size());
  for (const auto& x : xs) mirrored.push_back(mirror.observation.Apply(x));

  typename nn::Body<S>::Cache c1, c2;
  std::vector<Matrix<S>> m1, m2;
  nn::Carry<S> k1 = net.InitialState(batch).actor;
  nn::Carry<S> k2 = k1;
  net.ForwardActor(xs, k1, m1, grad ? &c1 : nullptr);
  net.ForwardActor(mirrored, k2, m2, grad ? &c2 : nullptr);

  double count = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) count += mask.empty() ? batch : mask[t].sum();
  if (count <= 0.0) return 0.0;

  double loss = 0.0;
  std::vector<Matrix<S>> d1(xs.size()), d2(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    Matrix<S> diff = mirror.action.Apply(m1[t]) - m2[t];
    if (!mask.empty()) diff = diff.array().rowwise() * mask[t].array();
    loss += static_cast<double>(diff.squaredNorm());
    if (grad) {
      const Matrix<S> g = static_cast<S>(2.0 * weight / count) * diff;
      // The signed permutation is its own transpose.
      d1[t] = mirror.action.Apply(g);
      d2[t] = -g;
    }
  }
  if (grad) {
    net.BackwardActor(c1, d1, *grad);
    net.BackwardActor(c2, d2, *grad);
  }
  return loss / count;
}

/// Per-observation defect ||M_a(pi(o)) - pi(M_o(o))|| for feed-forward
/// inputs (one column per observation).
template <typename S>
std::vector<double> MirrorDefects(const nn::ActorCritic<S>& net, const MirrorSpec& mirror,
                                  const Matrix<S>& inputs) {
  nn::Carry<S> k1 = net.InitialState(static_cast<int>(inputs.cols())).actor;
  nn::Carry<S> k2 = k1;
  std::vector<Matrix<S>> m1, m2;
  net.ForwardActor({inputs}, k1, m1, nullptr);
  net.ForwardActor({mirror.observation.Apply(inputs)}, k2, m2, nullptr);
  const Matrix<S> diff = mirror.action.Apply(m1[0]) - m2[0];
  std::vector<double> out(diff.cols());
  for (Eigen::Index b = 0; b < diff.cols(); ++b) out[b] = static_cast<double>(diff.col(b).norm());
  return out;
}

}  // namespace biped::ppo
