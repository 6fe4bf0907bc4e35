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

// Policy checkpoint file. All fields little-endian:
//
//   char[4]  magic "BPCK"
//   u32      format version (1)
//   u32      architecture (0 ff, 1 ff-history, 2 lstm)
//   u32      observation size
//   u32      action size
//   u32      history length
//   u32      hidden layer count n
//   u32[n]   hidden widths
//   f64      joint velocity observation scale
//   f64      joint torque observation scale
//   f64      action scale (rad per unit)
//   u32      gait cycle period (control steps)
//   u32      torque feedback enabled (0 or 1)
//   u64      parameter count p
//   f32[p]   parameters, layout [actor | critic | log-std]

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <type_traits>
#include <string>
#include <vector>

#include "biped/env/observation.hpp"
#include "biped/nn/policy.hpp"

namespace biped::nn {

inline constexpr char kCheckpointMagic[4] = {'B', 'P', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  NetworkSpec spec;
  double velocity_scale = obs::kVelocityScale;
  double torque_scale = obs::kTorqueScale;
  double action_scale = 0.5;
  int cycle_period = 40;
  bool feedback = true;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<float> params;
};

namespace detail {

template <typename T>
void PutLe(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T GetLe(std::istream& in, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ConfigError("checkpoint '" + path + "': truncated file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void SaveCheckpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  const NetworkSpec& s = ck.meta.spec;
  out.write(kCheckpointMagic, 4);
  detail::PutLe<std::uint32_t>(out, kCheckpointVersion);
  detail::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(s.arch));
  detail::PutLe<std::uint32_t>(out, s.observation_size);
  detail::PutLe<std::uint32_t>(out, s.action_size);
  detail::PutLe<std::uint32_t>(out, s.history);
  detail::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(s.hidden.size()));
  for (int h : s.hidden) detail::PutLe<std::uint32_t>(out, h);
  detail::PutLe<double>(out, ck.meta.velocity_scale);
  detail::PutLe<double>(out, ck.meta.torque_scale);
  detail::PutLe<double>(out, ck.meta.action_scale);
  detail::PutLe<std::uint32_t>(out, ck.meta.cycle_period);
  detail::PutLe<std::uint32_t>(out, ck.meta.feedback ? 1 : 0);
  detail::PutLe<std::uint64_t>(out, ck.params.size());
  for (float v : ck.params) detail::PutLe<float>(out, v);
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ConfigError("checkpoint '" + path + "': bad magic");
  }
  const auto version = detail::GetLe<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint '" + path + "': unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  NetworkSpec& s = ck.meta.spec;
  const auto arch = detail::GetLe<std::uint32_t>(in, path);
  if (arch > 2) throw ConfigError("checkpoint '" + path + "': unknown architecture");
  s.arch = static_cast<Architecture>(arch);
  s.observation_size = static_cast<int>(detail::GetLe<std::uint32_t>(in, path));
  s.action_size = static_cast<int>(detail::GetLe<std::uint32_t>(in, path));
  s.history = static_cast<int>(detail::GetLe<std::uint32_t>(in, path));
  const auto layers = detail::GetLe<std::uint32_t>(in, path);
  if (layers > 64) throw ConfigError("checkpoint '" + path + "': implausible layer count");
  s.hidden.resize(layers);
  for (auto& h : s.hidden) h = static_cast<int>(detail::GetLe<std::uint32_t>(in, path));
  ck.meta.velocity_scale = detail::GetLe<double>(in, path);
  ck.meta.torque_scale = detail::GetLe<double>(in, path);
  ck.meta.action_scale = detail::GetLe<double>(in, path);
  ck.meta.cycle_period = static_cast<int>(detail::GetLe<std::uint32_t>(in, path));
  ck.meta.feedback = detail::GetLe<std::uint32_t>(in, path) != 0;
  const auto count = detail::GetLe<std::uint64_t>(in, path);
  s.Validate();
  const ActorCritic<float> probe(s);
  if (count != static_cast<std::uint64_t>(probe.NumParams())) {
    throw ConfigError("checkpoint '" + path + "': parameter count " + std::to_string(count) +
                      " does not match the network spec (" +
                      std::to_string(probe.NumParams()) + ")");
  }
  ck.params.resize(count);
  for (auto& v : ck.params) v = detail::GetLe<float>(in, path);
  return ck;
}

template <typename S>
Checkpoint MakeCheckpoint(const ActorCritic<S>& net, CheckpointMeta meta) {
  meta.spec = net.spec();
  Checkpoint ck{std::move(meta), {}};
  ck.params.resize(net.NumParams());
  for (int i = 0; i < net.NumParams(); ++i) ck.params[i] = static_cast<float>(net.params()[i]);
  return ck;
}

template <typename S>
ActorCritic<S> NetworkFromCheckpoint(const Checkpoint& ck) {
  ActorCritic<S> net(ck.meta.spec);
  for (int i = 0; i < net.NumParams(); ++i) net.params()[i] = static_cast<S>(ck.params[i]);
  return net;
}

}  // namespace biped::nn
