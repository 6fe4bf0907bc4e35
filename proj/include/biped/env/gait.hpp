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

// Locomotion modes, the cyclic gait clock, and the phase schedule that turns
// the clock into per-foot reward coefficients.

#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "biped/common.hpp"

namespace biped {

enum class Mode : int { kWalking = 0, kStepping = 1, kStanding = 2 };

inline constexpr int kNumModes = 3;

inline const char* ToString(Mode m) {
  switch (m) {
    case Mode::kWalking: return "walking";
    case Mode::kStepping: return "stepping";
    case Mode::kStanding: return "standing";
  }
  return "?";
}

inline Mode ParseMode(const std::string& s) {
  if (s == "walking") return Mode::kWalking;
  if (s == "stepping") return Mode::kStepping;
  if (s == "standing") return Mode::kStanding;
  throw ConfigError("mode: expected walking, stepping or standing, got '" + s + "'");
}

// Reference ranges: forward speed (m/s) when walking, turning rate (rad/s)
// when stepping in place.
inline constexpr double kWalkingSpeedMin = 0.0;
inline constexpr double kWalkingSpeedMax = 0.4;
inline constexpr double kTurnRateMax = 0.5;

struct ModeCommand {
  Mode mode = Mode::kStanding;
  double reference = 0.0;

  Eigen::Vector3d OneHot() const {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    v[static_cast<int>(mode)] = 1.0;
    return v;
  }

  /// Target forward speed of the root.
  double TargetSpeed() const { return mode == Mode::kWalking ? reference : 0.0; }

  bool operator==(const ModeCommand&) const = default;
};

/// Empty when the command is acceptable, otherwise the reason.
inline std::string CommandError(const ModeCommand& c) {
  if (!std::isfinite(c.reference)) return "reference must be finite";
  std::ostringstream os;
  if (c.mode == Mode::kWalking &&
      (c.reference < kWalkingSpeedMin || c.reference > kWalkingSpeedMax)) {
    os << "walking reference " << c.reference << " outside [" << kWalkingSpeedMin << ", "
       << kWalkingSpeedMax << "] m/s";
  } else if (c.mode == Mode::kStepping && std::abs(c.reference) > kTurnRateMax) {
    os << "stepping reference " << c.reference << " outside [" << -kTurnRateMax << ", "
       << kTurnRateMax << "] rad/s";
  }
  return os.str();
}

struct ClockState {
  int phase = 0;    // control steps, [0, period)
  int period = 40;  // control steps per gait cycle

  double Fraction() const { return static_cast<double>(phase) / period; }
};

inline Eigen::Vector2d ClockSignal(const ClockState& c) {
  const double a = 2.0 * M_PI * c.phase / c.period;
  return {std::sin(a), std::cos(a)};
}

inline ClockState AdvancePhase(ClockState c) {
  c.phase = (c.phase + 1) % c.period;
  return c;
}

/// Reward coefficients for the two feet at one instant of the cycle.
struct FootCoefficients {
  double grf_left = 0.0;
  double grf_right = 0.0;
  double spd_left = 0.0;
  double spd_right = 0.0;
};

/// Double support [0, a), left swing [a, b), double support [b, c), right
/// swing [c, 1). Support rewards force and penalizes speed; swing the reverse.
/// Coefficients ramp linearly across a window centered on each boundary.
struct GaitSchedule {
  std::array<double, 4> boundaries = {0.0, 0.1, 0.5, 0.6};
  double ramp = 0.02;         // fraction of the cycle
  double force_scale = 0.0;   // N; 0 selects total robot weight
  double speed_scale = 1.0;   // m/s

  void Validate() const {
    if (boundaries[0] != 0.0) throw ConfigError("reward.gait_boundaries: must start at 0");
    for (int i = 1; i < 4; ++i) {
      if (!(boundaries[i] > boundaries[i - 1] && boundaries[i] < 1.0)) {
        throw ConfigError("reward.gait_boundaries: must be increasing within [0, 1)");
      }
    }
    double shortest = 1.0 - boundaries[3];
    for (int i = 1; i < 4; ++i) shortest = std::min(shortest, boundaries[i] - boundaries[i - 1]);
    if (!(ramp >= 0.0 && ramp <= shortest)) {
      throw ConfigError("reward.gait_ramp: must be in [0, shortest region]");
    }
    if (!(force_scale >= 0.0)) throw ConfigError("reward.force_scale: must be >= 0");
    if (!(speed_scale > 0.0)) throw ConfigError("reward.speed_scale: must be > 0");
  }

  // Region 0 and 2 are double support, 1 swings the left foot, 3 the right.
  static FootCoefficients RegionCoefficients(int region) {
    const bool left_swing = region == 1;
    const bool right_swing = region == 3;
    return {left_swing ? -1.0 : 1.0, right_swing ? -1.0 : 1.0, left_swing ? 1.0 : -1.0,
            right_swing ? 1.0 : -1.0};
  }

  FootCoefficients Coefficients(double fraction, Mode mode) const {
    if (mode == Mode::kStanding) return RegionCoefficients(0);
    double x = fraction - std::floor(fraction);
    int region = 3;
    while (region > 0 && x < boundaries[region]) --region;
    FootCoefficients c = RegionCoefficients(region);
    if (ramp <= 0.0) return c;
    const double half = 0.5 * ramp;
    // Distance past the region's own start boundary, and to the next one.
    const double start = boundaries[region];
    const double end = region == 3 ? 1.0 : boundaries[region + 1];
    int other = -1;
    double t = 0.0;  // weight of this region at x
    if (x - start < half) {
      other = (region + 3) % 4;
      t = 0.5 + (x - start) / ramp;
    } else if (end - x < half) {
      other = (region + 1) % 4;
      t = 0.5 + (end - x) / ramp;
    }
    if (other < 0) return c;
    const FootCoefficients o = RegionCoefficients(other);
    const auto mix = [t](double a, double b) { return t * a + (1.0 - t) * b; };
    return {mix(c.grf_left, o.grf_left), mix(c.grf_right, o.grf_right),
            mix(c.spd_left, o.spd_left), mix(c.spd_right, o.spd_right)};
  }
};

}  // namespace biped
