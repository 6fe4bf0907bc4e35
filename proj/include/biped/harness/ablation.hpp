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

// Named ablation cells, the evaluation protocol shared by the ablation and
// cross-solver reports, and the study driver that trains (or reuses) every
// cell for every seed and evaluates it on both plants.

#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "biped/harness/run_config.hpp"
#include "biped/harness/runs.hpp"

namespace biped::harness {

/// A named set of overrides applied on top of a base config.
struct AblationCell {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

inline std::vector<AblationCell> PolicyCells() {
  return {
      {"PolicyA", {{"bemf.enabled", "false"}, {"episode.feedback", "false"}}},
      {"PolicyA-wide",
       {{"bemf.enabled", "false"}, {"episode.feedback", "false"},
        {"episode.terminate_on_feet", "true"}}},
      {"PolicyB", {{"bemf.enabled", "true"}, {"episode.feedback", "false"}}},
      {"PolicyC", {{"bemf.enabled", "true"}, {"episode.feedback", "true"}}},
  };
}

/// Architecture x dynamics randomization. Each architecture keeps its own
/// default layer widths unless the base config pins them.
inline std::vector<AblationCell> ArchitectureCells() {
  std::vector<AblationCell> cells;
  for (const char* arch : {"ff", "ff-history", "lstm"}) {
    for (bool dr : {true, false}) {
      cells.push_back({std::string(arch) + (dr ? "-dr" : "-nodr"),
                       {{"network.architecture", arch},
                        {"episode.randomize_dynamics", dr ? "true" : "false"}}});
    }
  }
  return cells;
}

inline std::vector<AblationCell> AllCells() {
  std::vector<AblationCell> all = PolicyCells();
  for (auto& c : ArchitectureCells()) all.push_back(std::move(c));
  return all;
}

/// "policies", "architectures", "all", or a comma-separated list of names.
inline std::vector<AblationCell> SelectCells(const std::string& selection) {
  if (selection == "policies") return PolicyCells();
  if (selection == "architectures") return ArchitectureCells();
  if (selection == "all") return AllCells();
  const std::vector<AblationCell> all = AllCells();
  std::vector<AblationCell> out;
  std::stringstream in(selection);
  std::string name;
  while (std::getline(in, name, ',')) {
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& c) { return c.name == name; });
    if (it == all.end()) throw ConfigError("ablation: unknown cell '" + name + "'");
    out.push_back(*it);
  }
  if (out.empty()) throw ConfigError("ablation: empty cell selection");
  return out;
}

inline KeyValueConfig ApplyCell(const KeyValueConfig& base, const AblationCell& cell) {
  KeyValueConfig c = base;
  for (const auto& [k, v] : cell.overrides) c.Set(k, v);
  return c;
}

/// How a trained policy is scored. Defaults: nominal dynamics, rough
/// terrain, a fixed walking command, deterministic actions.
struct EvalProtocol {
  ModeCommand command{Mode::kWalking, 0.3};
  int episodes = 10;
  std::uint64_t seed = 1;
  bool randomize_dynamics = false;
  bool terrain = true;
};

inline EnvConfig EvalEnv(const RunConfig& rc, PlantKind plant, ContactSolver solver,
                         const EvalProtocol& p) {
  EnvConfig env = rc.env;
  env.episode.plant = plant;
  env.episode.solver = solver;
  env.episode.randomize_dynamics = p.randomize_dynamics;
  env.episode.terrain = p.terrain;
  return env;
}

/// Terrain for evaluation, drawn from its own seed so it is never the
/// exact field a policy trained on.
inline HeightField EvalTerrain(const EnvConfig& env, const EvalProtocol& p) {
  return ppo::TrainingTerrain(env, DeriveSeed(p.seed, 0xE7A3));
}

inline ppo::EvalMetrics RunProtocol(const nn::ActorCritic<float>& net, const EnvConfig& env,
                                    const EvalProtocol& p, bool collect_inputs = false) {
  ppo::EvalOptions opt;
  opt.episodes = p.episodes;
  opt.seed = p.seed;
  opt.command = p.command;
  opt.collect_inputs = collect_inputs;
  return ppo::EvaluatePolicy(net, env, EvalTerrain(env, p), opt);
}

struct CellResult {
  std::string cell;
  std::uint64_t seed = 0;
  fs::path dir;
  bool ok = false;
  std::string error;
  ppo::EvalMetrics training, real;
};

struct AblationOptions {
  std::vector<AblationCell> cells = PolicyCells();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  fs::path root = "runs/ablation";
  EvalProtocol protocol;
};

/// Resolves one cell of the study for one seed.
inline RunConfig CellConfig(const KeyValueConfig& base, const AblationCell& cell,
                            std::uint64_t seed, const std::string& base_dir = ".") {
  KeyValueConfig raw = ApplyCell(base, cell);
  raw.Set("run.seed", static_cast<std::int64_t>(seed));
  return ParseRunConfig(raw, base_dir);
}

/// Evaluates an already trained cell on both plants.
inline CellResult EvaluateCell(const RunConfig& rc, const fs::path& dir, const std::string& cell,
                               const EvalProtocol& p) {
  CellResult r;
  r.cell = cell;
  r.seed = rc.run.seed;
  r.dir = dir;
  const LoadedPolicy policy = LoadPolicy(RunPaths{dir}.final_checkpoint());
  r.training = RunProtocol(policy.net, EvalEnv(rc, PlantKind::kTraining, rc.env.episode.solver, p), p);
  r.real = RunProtocol(policy.net, EvalEnv(rc, PlantKind::kRealAnalog, rc.env.episode.solver, p), p);
  r.ok = true;
  return r;
}

/// Trains (or reuses) and evaluates every selected cell for every seed.
/// Seeds are the outer loop so early seeds complete first. A failing cell
/// is recorded and the study continues.
inline std::vector<CellResult> RunAblation(const KeyValueConfig& base, const AblationOptions& opt,
                                           std::ostream* log, const std::string& base_dir = ".") {
  std::vector<CellResult> results;
  for (std::uint64_t seed : opt.seeds) {
    for (const AblationCell& cell : opt.cells) {
      CellResult r;
      r.cell = cell.name;
      r.seed = seed;
      try {
        const RunConfig rc = CellConfig(base, cell, seed, base_dir);
        const TrainResult t =
            EnsureTrained(rc, opt.root, cell.name + "-s" + std::to_string(seed), log);
        r.dir = t.dir;
        if (t.diverged) throw std::runtime_error(t.message);
        r = EvaluateCell(rc, t.dir, cell.name, opt.protocol);
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        if (log) *log << cell.name << " seed " << seed << " failed: " << e.what() << '\n';
      }
      results.push_back(std::move(r));
    }
  }
  return results;
}

inline nlohmann::json PlantColumn(const ppo::EvalMetrics& m) {
  return {{"median_time_to_fall", m.median_time_to_fall},
          {"mean_time_to_fall", m.time_to_fall.mean},
          {"truncations", m.truncations},
          {"tracking_rmse", m.tracking_rmse.mean},
          {"episode_return", m.episode_return.mean},
          {"velocity_error", m.velocity_error.mean}};
}

/// Per-seed rows plus, per cell and plant, mean and std over seeds.
inline nlohmann::json AblationReport(const std::vector<CellResult>& results) {
  nlohmann::json rows = nlohmann::json::array();
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> pool;
  std::vector<std::string> order;
  for (const CellResult& r : results) {
    nlohmann::json row = {{"cell", r.cell}, {"seed", r.seed}, {"dir", r.dir.string()}, {"ok", r.ok}};
    if (std::find(order.begin(), order.end(), r.cell) == order.end()) order.push_back(r.cell);
    if (!r.ok) {
      row["error"] = r.error;
      rows.push_back(row);
      continue;
    }
    row["training"] = PlantColumn(r.training);
    row["real_analog"] = PlantColumn(r.real);
    for (const char* plant : {"training", "real_analog"}) {
      for (const auto& [k, v] : row[plant].items()) pool[r.cell][plant][k].push_back(v.get<double>());
    }
    rows.push_back(row);
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const std::string& name : order) {
    nlohmann::json c = {{"cell", name}};
    for (const auto& [plant, metrics] : pool[name]) {
      for (const auto& [k, xs] : metrics) {
        const ppo::MeanStd s = ppo::Summarize(xs);
        c[plant][k] = {{"mean", s.mean}, {"std", s.std}, {"seeds", xs.size()}};
      }
    }
    cells.push_back(c);
  }
  return {{"rows", rows}, {"cells", cells}};
}

inline std::string FormatAblationTable(const nlohmann::json& report) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "cell" << std::setw(13) << "plant" << std::right
     << std::setw(18) << "median ttf" << std::setw(18) << "tracking rmse" << std::setw(18)
     << "return" << '\n';
  const auto cell = [](const nlohmann::json& c, const char* plant, const char* key) {
    std::ostringstream s;
    if (!c.contains(plant)) return std::string("-");
    s << std::fixed << std::setprecision(2) << c[plant][key]["mean"].get<double>() << " +- "
      << c[plant][key]["std"].get<double>();
    return s.str();
  };
  for (const auto& c : report["cells"]) {
    for (const char* plant : {"training", "real_analog"}) {
      os << std::left << std::setw(14) << c["cell"].get<std::string>() << std::setw(13) << plant
         << std::right << std::setw(18) << cell(c, plant, "median_time_to_fall") << std::setw(18)
         << cell(c, plant, "tracking_rmse") << std::setw(18) << cell(c, plant, "episode_return")
         << '\n';
    }
  }
  return os.str();
}

/// Evaluates one checkpoint under both contact solvers with identical
/// seeds and reports per-solver metrics and the differences.
inline nlohmann::json Sim2SimReport(const nn::ActorCritic<float>& net, const RunConfig& rc,
                                    PlantKind plant, const EvalProtocol& p) {
  const ppo::EvalMetrics a = RunProtocol(net, EvalEnv(rc, plant, ContactSolver::kPenalty, p), p);
  const ppo::EvalMetrics b = RunProtocol(net, EvalEnv(rc, plant, ContactSolver::kImpulse, p), p);
  const auto lengths = [](const ppo::EvalMetrics& m) {
    std::vector<int> out;
    for (const auto& e : m.episodes) out.push_back(e.length);
    return out;
  };
  const auto returns = [](const ppo::EvalMetrics& m) {
    std::vector<double> out;
    for (const auto& e : m.episodes) out.push_back(e.episode_return);
    return out;
  };
  nlohmann::json j;
  j["plant"] = ToString(plant);
  j["command"] = {{"mode", ToString(p.command.mode)}, {"reference", p.command.reference}};
  j["terrain"] = p.terrain;
  j["penalty"] = MetricsJson(a);
  j["impulse"] = MetricsJson(b);
  j["penalty"]["lengths"] = lengths(a);
  j["impulse"]["lengths"] = lengths(b);
  j["penalty"]["returns"] = returns(a);
  j["impulse"]["returns"] = returns(b);
  const double la = a.length.mean;
  j["delta"] = {{"mean_length", b.length.mean - la},
                {"relative_length", la > 0.0 ? (b.length.mean - la) / la : 0.0},
                {"mean_return", b.episode_return.mean - a.episode_return.mean},
                {"truncations", b.truncations - a.truncations}};
  return j;
}

}  // namespace biped::harness
