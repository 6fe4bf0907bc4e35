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
#include <cmath>
#include <vector>

#include "biped/common.hpp"

namespace biped {

struct TerrainParams {
  double max_height = 0.035;  // m
  double length = 20.0;       // m
  double spacing = 0.05;      // m
  int smoothing = 5;          // moving-average window, samples
  // Per-episode offset is drawn from [offset_min, offset_max].
  double offset_min = -15.0;
  double offset_max = -1.0;
};

/// 1-D elevation profile laid over the flat floor. The field covers
/// x in [offset, offset + spacing * (n - 1)] and is linearly interpolated;
/// outside it the floor is flat.
class HeightField {
 public:
  HeightField() = default;
  HeightField(std::vector<double> elevation, double spacing, double offset = 0.0)
      : elevation_(std::move(elevation)), spacing_(spacing), offset_(offset) {}

  static HeightField Flat() { return HeightField(); }

  bool empty() const { return elevation_.empty(); }
  const std::vector<double>& elevation() const { return elevation_; }
  double spacing() const { return spacing_; }
  double offset() const { return offset_; }

  HeightField WithOffset(double offset) const {
    HeightField h = *this;
    h.offset_ = offset;
    return h;
  }

  double FieldHeight(double x) const {
    if (elevation_.size() < 2) return 0.0;
    const double u = (x - offset_) / spacing_;
    if (u < 0.0 || u > static_cast<double>(elevation_.size() - 1)) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(u), elevation_.size() - 2);
    const double t = u - static_cast<double>(i);
    return (1.0 - t) * elevation_[i] + t * elevation_[i + 1];
  }

  /// Effective ground height: the higher of the flat floor and the field.
  double GroundHeight(double x) const { return std::max(0.0, FieldHeight(x)); }

  double MaxElevation() const {
    double m = 0.0;
    for (double e : elevation_) m = std::max(m, e);
    return m;
  }

 private:
  std::vector<double> elevation_;
  double spacing_ = 0.05;
  double offset_ = 0.0;
};

/// Filtered uniform noise, rescaled so the tallest bump reaches max_height,
/// then clamped to [0, max_height]. Roughly half the field stays at floor
/// level, leaving scattered obstacles.
inline HeightField GenerateHeightField(const TerrainParams& p, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::lround(p.length / p.spacing)) + 1;
  std::vector<double> raw(n);
  for (auto& r : raw) r = Uniform(rng, -1.0, 1.0);
  std::vector<double> smooth(n, 0.0);
  const int half = std::max(0, p.smoothing / 2);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    int count = 0;
    for (int k = -half; k <= half; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(i) + k;
      if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(n)) continue;
      acc += raw[static_cast<std::size_t>(idx)];
      ++count;
    }
    smooth[i] = acc / count;
    peak = std::max(peak, smooth[i]);
  }
  const double scale = peak > 0.0 ? p.max_height / peak : 0.0;
  for (auto& s : smooth) s = std::clamp(s * scale, 0.0, p.max_height);
  return HeightField(std::move(smooth), p.spacing, 0.0);
}

inline HeightField RandomizeTerrainOffset(const HeightField& hf, const TerrainParams& p, Rng& rng) {
  return hf.WithOffset(Uniform(rng, p.offset_min, p.offset_max));
}

}  // namespace biped
