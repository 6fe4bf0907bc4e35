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

// Run configuration: one sectioned key-value file holding everything a
// training or evaluation run needs. Loading validates every field; the
// resolved form lists every field explicitly and is what gets persisted
// next to run outputs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "biped/config_file.hpp"
#include "biped/env/environment.hpp"
#include "biped/env/randomization.hpp"
#include "biped/nn/network.hpp"
#include "biped/ppo/trainer.hpp"

namespace biped::harness {

struct RunSettings {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = "runs/train";
  int checkpoint_every = 50;  // iterations; a final checkpoint is always written
  int max_iterations = 0;     // 0: stop on the sample budget only

  void Validate() const {
    if (workers <= 0) throw ConfigError("run.workers: must be > 0");
    if (max_iterations < 0) throw ConfigError("run.max_iterations: must be >= 0");
    if (checkpoint_every <= 0) throw ConfigError("run.checkpoint_every: must be > 0");
    if (out.empty()) throw ConfigError("run.out: must not be empty");
  }
};

struct RunConfig {
  EnvConfig env;
  nn::NetworkSpec network;
  ppo::PpoConfig ppo;
  RunSettings run;

  void Validate() const {
    env.Validate();
    network.Validate();
    if (network.observation_size != kObservationSize || network.action_size != kActionSize) {
      throw ConfigError("network: observation/action sizes are fixed by the environment");
    }
    ppo.Validate();
    run.Validate();
  }

  ppo::TrainOptions TrainOptions() const {
    ppo::TrainOptions o;
    o.env = env;
    o.network = network;
    o.ppo = ppo;
    o.seed = run.seed;
    o.workers = run.workers;
    o.max_iterations = run.max_iterations;
    return o;
  }
};

namespace detail {

inline std::string Join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

inline std::vector<double> ToVector(const JointVector& v) { return {v.data(), v.data() + v.size()}; }

template <std::size_t N>
void ReadArray(const KeyValueConfig& cfg, const std::string& key, std::array<double, N>& out) {
  if (!cfg.Has(key)) return;
  const auto v = cfg.GetDoubles(key, {});
  if (v.size() != N) {
    throw ConfigError(key + ": expected " + std::to_string(N) + " values, got " +
                      std::to_string(v.size()));
  }
  std::copy(v.begin(), v.end(), out.begin());
}

inline void ReadRange(const KeyValueConfig& cfg, const std::string& key, double& low,
                      double& high) {
  const auto v = cfg.GetDoubles(key, {low, high});
  if (v.size() != 2) throw ConfigError(key + ": expected two values (low high)");
  low = v[0];
  high = v[1];
}

}  // namespace detail

inline EpisodeConfig LoadEpisodeConfig(const KeyValueConfig& cfg) {
  EpisodeConfig e;
  e.max_steps = static_cast<int>(cfg.GetInt("episode.max_steps", e.max_steps));
  e.substeps = static_cast<int>(cfg.GetInt("episode.substeps", e.substeps));
  e.sim_dt = cfg.GetDouble("episode.sim_dt", e.sim_dt);
  e.min_root_height = cfg.GetDouble("episode.min_root_height", e.min_root_height);
  e.max_root_height = cfg.GetDouble("episode.max_root_height", e.max_root_height);
  e.pitch_limit = cfg.GetDouble("episode.pitch_limit", e.pitch_limit);
  e.terminate_on_feet = cfg.GetBool("episode.terminate_on_feet", e.terminate_on_feet);
  e.feet_distance_threshold =
      cfg.GetDouble("episode.feet_distance_threshold", e.feet_distance_threshold);
  e.terminations = cfg.GetBool("episode.terminations", e.terminations);
  e.randomize_dynamics = cfg.GetBool("episode.randomize_dynamics", e.randomize_dynamics);
  e.terrain = cfg.GetBool("episode.terrain", e.terrain);
  e.feedback = cfg.GetBool("episode.feedback", e.feedback);
  e.cycle_period = static_cast<int>(cfg.GetInt("episode.cycle_period", e.cycle_period));
  e.reset_noise = cfg.GetDouble("episode.reset_noise", e.reset_noise);
  e.action_scale = cfg.GetDouble("episode.action_scale", e.action_scale);
  e.plant = ParsePlantKind(cfg.GetString("episode.plant", ToString(e.plant)));
  e.solver = ParseContactSolver(cfg.GetString("episode.solver", ToString(e.solver)));
  auto& s = e.sampling;
  s.uniform_modes = cfg.GetBool("episode.uniform_modes", s.uniform_modes);
  s.fixed_mode = ParseMode(cfg.GetString("episode.fixed_mode", ToString(s.fixed_mode)));
  detail::ReadRange(cfg, "episode.walk_reference", s.walk_min, s.walk_max);
  s.turn_max = cfg.GetDouble("episode.turn_max", s.turn_max);
  e.bemf = LoadBemfConfig(cfg);
  return e;
}

inline void LoadRewardConfig(const KeyValueConfig& cfg, RewardWeights& w, GaitSchedule& g) {
  detail::ReadArray(cfg, "reward.weights", w.w);
  detail::ReadArray(cfg, "reward.gait_boundaries", g.boundaries);
  g.ramp = cfg.GetDouble("reward.gait_ramp", g.ramp);
  g.force_scale = cfg.GetDouble("reward.force_scale", g.force_scale);
  g.speed_scale = cfg.GetDouble("reward.speed_scale", g.speed_scale);
}

inline TerrainParams LoadTerrainParams(const KeyValueConfig& cfg) {
  TerrainParams t;
  t.max_height = cfg.GetDouble("terrain.max_height", t.max_height);
  t.length = cfg.GetDouble("terrain.length", t.length);
  t.spacing = cfg.GetDouble("terrain.spacing", t.spacing);
  t.smoothing = static_cast<int>(cfg.GetInt("terrain.smoothing", t.smoothing));
  detail::ReadRange(cfg, "terrain.offset", t.offset_min, t.offset_max);
  if (!(t.max_height >= 0.0)) throw ConfigError("terrain.max_height: must be >= 0");
  if (!(t.spacing > 0.0 && t.length > t.spacing)) {
    throw ConfigError("terrain.length/spacing: require length > spacing > 0");
  }
  if (t.smoothing < 1) throw ConfigError("terrain.smoothing: must be >= 1");
  if (!(t.offset_min <= t.offset_max)) throw ConfigError("terrain.offset: require low <= high");
  return t;
}

inline nn::NetworkSpec LoadNetworkSpec(const KeyValueConfig& cfg) {
  const nn::Architecture arch =
      nn::ParseArchitecture(cfg.GetString("network.architecture", "ff"));
  nn::NetworkSpec s = nn::NetworkSpec::Default(arch);
  if (cfg.Has("network.hidden")) {
    s.hidden.clear();
    for (double h : cfg.GetDoubles("network.hidden", {})) {
      if (h != static_cast<int>(h)) throw ConfigError("network.hidden: widths must be integers");
      s.hidden.push_back(static_cast<int>(h));
    }
  }
  s.history = static_cast<int>(cfg.GetInt("network.history", s.history));
  s.Validate();
  return s;
}

inline RunSettings LoadRunSettings(const KeyValueConfig& cfg) {
  RunSettings r;
  const std::int64_t seed = cfg.GetInt("run.seed", static_cast<std::int64_t>(r.seed));
  if (seed < 0) throw ConfigError("run.seed: must be >= 0");
  r.seed = static_cast<std::uint64_t>(seed);
  r.workers = static_cast<int>(cfg.GetInt("run.workers", r.workers));
  r.out = cfg.GetString("run.out", r.out);
  r.checkpoint_every = static_cast<int>(cfg.GetInt("run.checkpoint_every", r.checkpoint_every));
  r.max_iterations = static_cast<int>(cfg.GetInt("run.max_iterations", r.max_iterations));
  return r;
}

/// Every field written explicitly; loading the result reproduces `rc`.
inline KeyValueConfig ResolvedConfig(const RunConfig& rc) {
  KeyValueConfig c;
  const RobotModel& m = rc.env.model;
  // Leg sections are shared by both legs, so the left leg speaks for both.
  for (int i : {kTorso, kThighLeft, kShankLeft, kFootLeft}) {
    const std::string s = std::string("link.") + biped::detail::SegmentName(i) + ".";
    c.Set(s + "mass", m.links[i].mass);
    c.Set(s + "com", detail::Join({m.links[i].com.x(), m.links[i].com.y()}));
    c.Set(s + "inertia", m.links[i].inertia);
    c.Set(s + "length", m.links[i].length);
  }
  for (int j = 0; j < 3; ++j) {
    const std::string s = std::string("joint.") + biped::detail::JointKind(j) + ".";
    const JointParams& p = m.joints[j];
    c.Set(s + "lower", p.lower);
    c.Set(s + "upper", p.upper);
    c.Set(s + "velocity_limit", p.velocity_limit);
    c.Set(s + "nominal", p.nominal);
    c.Set(s + "static_friction", p.static_friction);
    c.Set(s + "viscous_friction", p.viscous_friction);
    c.Set(s + "armature", p.armature);
  }
  c.Set("foot.heel", detail::Join({m.heel.x(), m.heel.y()}));
  c.Set("foot.toe", detail::Join({m.toe.x(), m.toe.y()}));
  c.Set("geometry.hip_width", m.hip_width);
  c.Set("contact.stiffness", m.contact.stiffness);
  c.Set("contact.damping", m.contact.damping);
  c.Set("contact.tangential_stiffness", m.contact.tangential_stiffness);
  c.Set("contact.tangential_damping", m.contact.tangential_damping);
  c.Set("contact.friction", m.contact.friction);
  c.Set("contact.baumgarte", m.contact.baumgarte);
  c.Set("contact.solver_iterations", m.contact.solver_iterations);
  c.Set("contact.stiction_velocity", m.contact.stiction_velocity);

  const ActuatorParams& a = rc.env.actuator;
  c.Set("actuator.kp", detail::Join(detail::ToVector(a.kp)));
  c.Set("actuator.kd", detail::Join(detail::ToVector(a.kd)));
  c.Set("actuator.torque_constant", a.torque_constant);
  c.Set("actuator.gear_ratio", a.gear_ratio);
  c.Set("actuator.resistance", a.resistance);
  c.Set("actuator.back_emf_constant", a.back_emf_constant);
  c.Set("actuator.current_kp", a.current_kp);
  c.Set("actuator.current_ki", a.current_ki);
  c.Set("actuator.voltage_limit", a.voltage_limit);

  const EpisodeConfig& e = rc.env.episode;
  c.Set("bemf.enabled", e.bemf.enabled);
  c.Set("bemf.low", e.bemf.low);
  c.Set("bemf.high", e.bemf.high);
  c.Set("bemf.interval_ms", e.bemf.interval_ms);
  c.Set("episode.max_steps", e.max_steps);
  c.Set("episode.substeps", e.substeps);
  c.Set("episode.sim_dt", e.sim_dt);
  c.Set("episode.min_root_height", e.min_root_height);
  c.Set("episode.max_root_height", e.max_root_height);
  c.Set("episode.pitch_limit", e.pitch_limit);
  c.Set("episode.terminate_on_feet", e.terminate_on_feet);
  c.Set("episode.feet_distance_threshold", e.feet_distance_threshold);
  c.Set("episode.terminations", e.terminations);
  c.Set("episode.randomize_dynamics", e.randomize_dynamics);
  c.Set("episode.terrain", e.terrain);
  c.Set("episode.feedback", e.feedback);
  c.Set("episode.cycle_period", e.cycle_period);
  c.Set("episode.reset_noise", e.reset_noise);
  c.Set("episode.action_scale", e.action_scale);
  c.Set("episode.plant", std::string(ToString(e.plant)));
  c.Set("episode.solver", std::string(ToString(e.solver)));
  c.Set("episode.uniform_modes", e.sampling.uniform_modes);
  c.Set("episode.fixed_mode", std::string(ToString(e.sampling.fixed_mode)));
  c.Set("episode.walk_reference", detail::Join({e.sampling.walk_min, e.sampling.walk_max}));
  c.Set("episode.turn_max", e.sampling.turn_max);

  const auto& w = rc.env.weights.w;
  c.Set("reward.weights", detail::Join({w.begin(), w.end()}));
  const auto& g = rc.env.gait;
  c.Set("reward.gait_boundaries", detail::Join({g.boundaries.begin(), g.boundaries.end()}));
  c.Set("reward.gait_ramp", g.ramp);
  c.Set("reward.force_scale", g.force_scale);
  c.Set("reward.speed_scale", g.speed_scale);

  const DynamicsRandomization& r = rc.env.randomization;
  c.Set("randomization.mass_fraction", r.mass_fraction);
  c.Set("randomization.com_offset", r.com_offset);
  c.Set("randomization.static_friction",
        detail::Join({r.static_friction_low, r.static_friction_high}));
  c.Set("randomization.viscous_friction",
        detail::Join({r.viscous_friction_low, r.viscous_friction_high}));

  const TerrainParams& t = rc.env.terrain;
  c.Set("terrain.max_height", t.max_height);
  c.Set("terrain.length", t.length);
  c.Set("terrain.spacing", t.spacing);
  c.Set("terrain.smoothing", t.smoothing);
  c.Set("terrain.offset", detail::Join({t.offset_min, t.offset_max}));

  const ppo::PpoConfig& p = rc.ppo;
  c.Set("ppo.learning_rate", p.learning_rate);
  c.Set("ppo.clip", p.clip);
  c.Set("ppo.gamma", p.gamma);
  c.Set("ppo.lambda", p.lambda);
  c.Set("ppo.epochs", p.epochs);
  c.Set("ppo.minibatch", p.minibatch);
  c.Set("ppo.rollouts_per_batch", p.rollouts_per_batch);
  c.Set("ppo.max_rollout_length", p.max_rollout_length);
  c.Set("ppo.symmetry_weight", p.symmetry_weight);
  c.Set("ppo.entropy_weight", p.entropy_weight);
  c.Set("ppo.value_weight", p.value_weight);
  c.Set("ppo.max_grad_norm", p.max_grad_norm);
  c.Set("ppo.chunk_length", p.chunk_length);
  c.Set("ppo.sample_budget", p.sample_budget);

  c.Set("network.architecture", std::string(nn::ToString(rc.network.arch)));
  std::vector<double> hidden(rc.network.hidden.begin(), rc.network.hidden.end());
  c.Set("network.hidden", detail::Join(hidden));
  c.Set("network.history", rc.network.history);

  c.Set("run.seed", static_cast<std::int64_t>(rc.run.seed));
  c.Set("run.workers", rc.run.workers);
  c.Set("run.out", rc.run.out);
  c.Set("run.checkpoint_every", rc.run.checkpoint_every);
  c.Set("run.max_iterations", rc.run.max_iterations);
  return c;
}

/// Builds and validates a run config. `robot.model` names a robot
/// description file (relative to `base_dir`) whose keys the main file may
/// override; keys that no loader reads are rejected so typos surface.
inline RunConfig ParseRunConfig(const KeyValueConfig& raw, const std::string& base_dir = ".") {
  KeyValueConfig cfg;
  if (raw.Has("robot.model")) {
    std::filesystem::path p = raw.GetString("robot.model", "");
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    cfg = KeyValueConfig::FromFile(p.string());
  }
  cfg.Merge(raw);

  RunConfig rc;
  rc.env.model = LoadRobotModel(cfg);
  rc.env.actuator = LoadActuatorParams(cfg);
  rc.env.episode = LoadEpisodeConfig(cfg);
  LoadRewardConfig(cfg, rc.env.weights, rc.env.gait);
  rc.env.randomization = LoadDynamicsRandomization(cfg);
  rc.env.terrain = LoadTerrainParams(cfg);
  rc.ppo = ppo::LoadPpoConfig(cfg);
  rc.network = LoadNetworkSpec(cfg);
  rc.run = LoadRunSettings(cfg);
  rc.Validate();

  const std::vector<std::string> known = ResolvedConfig(rc).Keys();
  const std::set<std::string> known_set(known.begin(), known.end());
  for (const std::string& key : raw.Keys()) {
    if (key != "robot.model" && !known_set.count(key)) {
      throw ConfigError(key + ": unknown configuration key");
    }
  }
  return rc;
}

inline RunConfig LoadRunConfig(const std::string& path) {
  const KeyValueConfig raw = KeyValueConfig::FromFile(path);
  return ParseRunConfig(raw, std::filesystem::path(path).parent_path().string());
}

/// Keys whose values differ between two configs (present in either).
inline std::vector<std::string> ConfigDiff(const KeyValueConfig& a, const KeyValueConfig& b) {
  std::set<std::string> keys;
  for (const auto& k : a.Keys()) keys.insert(k);
  for (const auto& k : b.Keys()) keys.insert(k);
  std::vector<std::string> diff;
  for (const auto& k : keys) {
    if (!a.Has(k) || !b.Has(k) || a.GetString(k, "") != b.GetString(k, "")) diff.push_back(k);
  }
  return diff;
}

}  // namespace biped::harness
