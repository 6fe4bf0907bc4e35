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

#include <cmath>

#include "biped/nn/network.hpp"

namespace biped::nn {

template <typename S>
class Adam {
 public:
  Adam(int n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector<S>::Zero(n)),
        v_(Vector<S>::Zero(n)) {}

  void Step(Vector<S>& params, const Vector<S>& grad) {
    ++t_;
    m_ = S(beta1_) * m_ + S(1.0 - beta1_) * grad;
    v_ = S(beta2_) * v_ + S(1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const S step = static_cast<S>(lr_ * std::sqrt(c2) / c1);
    params.array() -= step * m_.array() / (v_.array().sqrt() + static_cast<S>(eps_ * std::sqrt(c2)));
  }

  long steps() const { return t_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Vector<S> m_, v_;
};

/// Rescales `grad` in place so its norm is at most `max_norm`; returns the
/// norm before clipping.
template <typename S>
double ClipGradNorm(Vector<S>& grad, double max_norm) {
  const double norm = static_cast<double>(grad.norm());
  if (max_norm > 0.0 && norm > max_norm) grad *= static_cast<S>(max_norm / norm);
  return norm;
}

}  // namespace biped::nn
