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

// Run directories: training writes the resolved config, line-delimited
// metric and timing records, periodic checkpoints and a summary. A finished
// directory doubles as a cache entry keyed by its resolved config.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "biped/harness/run_config.hpp"
#include "biped/nn/checkpoint.hpp"
#include "biped/ppo/evaluate.hpp"
#include "biped/ppo/trainer.hpp"

namespace biped::harness {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path dir;

  fs::path config() const { return dir / "config.ini"; }
  fs::path metrics() const { return dir / "metrics.jsonl"; }
  fs::path timing() const { return dir / "timing.jsonl"; }
  fs::path checkpoints() const { return dir / "checkpoints"; }
  fs::path final_checkpoint() const { return dir / "final.ckpt"; }
  fs::path summary() const { return dir / "summary.json"; }

  fs::path checkpoint(int iteration) const {
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%05d.ckpt", iteration);
    return checkpoints() / name;
  }
};

struct TrainResult {
  fs::path dir;
  int iterations = 0;
  std::int64_t samples = 0;
  bool diverged = false;
  std::string message;
};

inline nlohmann::json ReadJsonFile(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  return nlohmann::json::parse(in);
}

inline std::vector<nlohmann::json> ReadJsonLines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

/// Trains `rc` into `dir` (created, existing outputs overwritten). Progress
/// lines go to `log` when non-null. Divergence is reported, not thrown; the
/// checkpoints written so far stay in place.
inline TrainResult TrainToDirectory(RunConfig rc, const fs::path& dir, std::ostream* log) {
  rc.run.out = dir.string();
  rc.Validate();
  const RunPaths paths{dir};
  fs::create_directories(paths.checkpoints());
  fs::remove(paths.summary());
  ResolvedConfig(rc).WriteFile(paths.config().string());

  std::ofstream metrics(paths.metrics()), timing(paths.timing());
  if (!metrics || !timing) throw ConfigError("cannot write logs under '" + dir.string() + "'");
  ppo::Trainer trainer(rc.TrainOptions());
  const nn::CheckpointMeta meta = trainer.Meta();
  TrainResult result;
  result.dir = dir;
  try {
    trainer.Run([&](int it, const ppo::IterationRecord& rec, const nn::ActorCritic<float>& net) {
      metrics << rec.metrics.dump() << '\n' << std::flush;
      timing << rec.timing.dump() << '\n' << std::flush;
      if (it % rc.run.checkpoint_every == 0) {
        nn::SaveCheckpoint(paths.checkpoint(it).string(), nn::MakeCheckpoint(net, meta));
      }
      if (log) {
        const auto& m = rec.metrics;
        *log << "iter " << it << "  samples " << m["total_samples"].get<std::int64_t>()
             << "  return " << std::fixed << std::setprecision(2)
             << m["mean_return"].get<double>() << "  length " << m["mean_length"].get<double>()
             << "  kl " << std::setprecision(4) << m["approx_kl"].get<double>() << "  "
             << std::setprecision(2) << rec.timing["iteration_s"].get<double>() << " s\n"
             << std::defaultfloat << std::flush;
      }
    });
  } catch (const ppo::TrainingDiverged& e) {
    result.diverged = true;
    result.message = e.what();
  }
  result.iterations = trainer.iteration();
  result.samples = trainer.total_samples();
  if (!result.diverged) {
    nn::SaveCheckpoint(paths.final_checkpoint().string(),
                       nn::MakeCheckpoint(trainer.network(), meta));
  }
  nlohmann::json summary = {{"status", result.diverged ? "diverged" : "complete"},
                            {"iterations", result.iterations},
                            {"total_samples", result.samples}};
  if (result.diverged) summary["message"] = result.message;
  std::ofstream(paths.summary()) << summary.dump(2) << '\n';
  return result;
}

/// Cache directory for a run: `label` plus a hash of the resolved config
/// with the output path blanked out.
inline fs::path CacheDirectory(const RunConfig& rc, const fs::path& root, const std::string& label) {
  RunConfig keyed = rc;
  keyed.run.out = "-";
  const std::size_t h = std::hash<std::string>{}(ResolvedConfig(keyed).ToString());
  std::ostringstream name;
  name << label << '-' << std::hex << std::setw(16) << std::setfill('0') << h;
  return root / name.str();
}

/// True when `dir` holds a finished run of exactly `rc`.
inline bool IsCachedRun(const RunConfig& rc, const fs::path& dir) {
  const RunPaths p{dir};
  if (!fs::exists(p.summary()) || !fs::exists(p.final_checkpoint())) return false;
  if (ReadJsonFile(p.summary()).value("status", "") != "complete") return false;
  // The output path is not part of a run's identity: the same run may be
  // reached through a relative or an absolute root.
  RunConfig expected = rc, stored;
  try {
    stored = ParseRunConfig(KeyValueConfig::FromFile(p.config().string()));
  } catch (const ConfigError&) {
    return false;
  }
  expected.run.out = stored.run.out = "-";
  return ResolvedConfig(stored).ToString() == ResolvedConfig(expected).ToString();
}

/// Returns the cached run of `rc` under `root`, training it first if absent.
inline TrainResult EnsureTrained(const RunConfig& rc, const fs::path& root, const std::string& label,
                                 std::ostream* log) {
  const fs::path dir = CacheDirectory(rc, root, label);
  if (IsCachedRun(rc, dir)) {
    const nlohmann::json s = ReadJsonFile(RunPaths{dir}.summary());
    return {dir, s["iterations"].get<int>(), s["total_samples"].get<std::int64_t>(), false, ""};
  }
  if (log) *log << "training " << label << " into " << dir.string() << '\n';
  return TrainToDirectory(rc, dir, log);
}

struct LoadedPolicy {
  nn::CheckpointMeta meta;
  nn::ActorCritic<float> net;
};

inline LoadedPolicy LoadPolicy(const fs::path& path) {
  const nn::Checkpoint ck = nn::LoadCheckpoint(path.string());
  return {ck.meta, nn::NetworkFromCheckpoint<float>(ck)};
}

/// Makes `env` match what the checkpoint was trained with; a config that
/// explicitly disagrees is an error rather than a silent override.
inline void ApplyCheckpointMeta(const nn::CheckpointMeta& meta, EnvConfig& env, bool strict) {
  if (meta.spec.observation_size != kObservationSize || meta.spec.action_size != kActionSize) {
    throw ConfigError("checkpoint: observation/action sizes do not match the environment");
  }
  if (meta.velocity_scale != obs::kVelocityScale || meta.torque_scale != obs::kTorqueScale) {
    throw ConfigError("checkpoint: observation scaling differs from this build");
  }
  if (strict) {
    if (meta.feedback != env.episode.feedback) {
      throw ConfigError(std::string("checkpoint/config mismatch: checkpoint has feedback ") +
                        (meta.feedback ? "on" : "off") + ", config has " +
                        (env.episode.feedback ? "on" : "off"));
    }
    if (meta.cycle_period != env.episode.cycle_period) {
      throw ConfigError("checkpoint/config mismatch: episode.cycle_period");
    }
    if (meta.action_scale != env.episode.action_scale) {
      throw ConfigError("checkpoint/config mismatch: episode.action_scale");
    }
  }
  env.episode.feedback = meta.feedback;
  env.episode.cycle_period = meta.cycle_period;
  env.episode.action_scale = meta.action_scale;
}

inline nlohmann::json ToJson(const ppo::MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::json MetricsJson(const ppo::EvalMetrics& m) {
  nlohmann::json j;
  j["episodes"] = m.episodes.size();
  j["episode_return"] = ToJson(m.episode_return);
  j["length"] = ToJson(m.length);
  j["time_to_fall"] = ToJson(m.time_to_fall);
  j["median_time_to_fall"] = m.median_time_to_fall;
  j["truncations"] = m.truncations;
  j["tracking_rmse"] = ToJson(m.tracking_rmse);
  j["velocity_error"] = ToJson(m.velocity_error);
  j["mirror_defect"] = ToJson(m.mirror_defect);
  j["median_mirror_defect"] = m.median_mirror_defect;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : m.episodes) {
    eps.push_back({{"mode", ToString(e.mode)},
                   {"return", e.episode_return},
                   {"length", e.length},
                   {"truncated", e.truncated},
                   {"reason", ToString(e.reason)},
                   {"tracking_rmse", e.tracking_rmse},
                   {"velocity_error", e.velocity_error}});
  }
  j["per_episode"] = eps;
  return j;
}

/// Columnar per-step trace with a header row.
class TraceWriter {
 public:
  explicit TraceWriter(const fs::path& path) : out_(path) {
    if (!out_) throw ConfigError("cannot write trace '" + path.string() + "'");
    out_ << "episode step time mode reference reward root_x root_z pitch root_vx";
    for (int j = 0; j < kNumJoints; ++j) out_ << " tau_pd_" << kJointNames[j];
    for (int j = 0; j < kNumJoints; ++j) out_ << " tau_applied_" << kJointNames[j];
    out_ << '\n';
    out_.precision(9);
  }

  void operator()(const ppo::TraceRow& r) {
    out_ << r.episode << ' ' << r.step << ' ' << r.time << ' ' << ToString(r.command.mode) << ' '
         << r.command.reference << ' ' << r.reward << ' ' << r.root_x << ' ' << r.root_z << ' '
         << r.pitch << ' ' << r.root_vx;
    for (int j = 0; j < kNumJoints; ++j) out_ << ' ' << r.tau_pd[j];
    for (int j = 0; j < kNumJoints; ++j) out_ << ' ' << r.tau_applied[j];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

/// Parses "walking:0.3", "standing" or "stepping:-0.2".
inline ModeCommand ParseCommand(const std::string& s) {
  ModeCommand c;
  const auto colon = s.find(':');
  c.mode = ParseMode(s.substr(0, colon));
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      const std::string ref = s.substr(colon + 1);
      c.reference = std::stod(ref, &used);
      if (used != ref.size()) throw std::invalid_argument(ref);
    } catch (const std::exception&) {
      throw ConfigError("command '" + s + "': bad reference");
    }
  }
  const std::string err = CommandError(c);
  if (!err.empty()) throw ConfigError("command '" + s + "': " + err);
  return c;
}

/// Parses "0:standing,80:walking:0.3,240:standing" into scheduled commands.
inline std::vector<ppo::ScheduledCommand> ParseSchedule(const std::string& s) {
  std::vector<ppo::ScheduledCommand> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("schedule entry '" + item + "': need step:mode");
    ppo::ScheduledCommand sc;
    try {
      sc.step = std::stoi(item.substr(0, colon));
    } catch (const std::exception&) {
      throw ConfigError("schedule entry '" + item + "': bad step");
    }
    if (sc.step < 0 || (!out.empty() && sc.step < out.back().step)) {
      throw ConfigError("schedule: steps must be non-negative and non-decreasing");
    }
    sc.command = ParseCommand(item.substr(colon + 1));
    out.push_back(sc);
  }
  return out;
}

}  // namespace biped::harness
