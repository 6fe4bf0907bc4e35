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

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace biped {

inline constexpr int kNumJoints = 6;
inline constexpr int kNumDofs = 9;  // root x, root z, root pitch, 6 joints
inline constexpr int kNumLinks = 7;
inline constexpr int kObservationSize = 28;
inline constexpr int kActionSize = kNumJoints;
inline constexpr double kGravity = 9.81;

using Vec2 = Eigen::Vector2d;
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using DofVector = Eigen::Matrix<double, kNumDofs, 1>;
using DofMatrix = Eigen::Matrix<double, kNumDofs, kNumDofs>;

// Generalized coordinate indices.
inline constexpr int kRootX = 0;
inline constexpr int kRootZ = 1;
inline constexpr int kRootPitch = 2;
inline constexpr int kFirstJoint = 3;

/// Raised for malformed or out-of-range configuration. The message names the
/// offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit mixing used to derive independent stream seeds from a master seed.
constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b = 0) {
  return SplitMix64(SplitMix64(SplitMix64(master) ^ a) ^ (b * 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

inline double Uniform(Rng& rng, double low, double high) {
  return std::uniform_real_distribution<double>(low, high)(rng);
}

}  // namespace biped
