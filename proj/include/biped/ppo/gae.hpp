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
#include <vector>

namespace biped::ppo {

/// One episode stored contiguously in a batch. `bootstrap_value` is V of the
/// state after the last step when the episode was truncated, else 0.
struct EpisodeSegment {
  int start = 0;
  int length = 0;
  double bootstrap_value = 0.0;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

inline GaeResult ComputeGae(const std::vector<double>& rewards, const std::vector<double>& values,
                            const std::vector<EpisodeSegment>& segments, double gamma,
                            double lambda) {
  GaeResult out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  for (const EpisodeSegment& seg : segments) {
    double next_value = seg.bootstrap_value;
    double running = 0.0;
    for (int t = seg.start + seg.length - 1; t >= seg.start; --t) {
      const double delta = rewards[t] + gamma * next_value - values[t];
      running = delta + gamma * lambda * running;
      out.advantages[t] = running;
      out.returns[t] = running + values[t];
      next_value = values[t];
    }
  }
  return out;
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
inline void NormalizeAdvantages(std::vector<double>& a) {
  if (a.empty()) return;
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  var /= static_cast<double>(a.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& x : a) x = (x - mean) * inv;
}

}  // namespace biped::ppo
