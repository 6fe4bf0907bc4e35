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

// biped: train, evaluate, ablate, cross-check solvers and stream a policy.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "biped/actuator/fit.hpp"
#include "biped/harness/ablation.hpp"
#include "biped/harness/run_config.hpp"
#include "biped/harness/runs.hpp"
#include "biped/harness/serve.hpp"

namespace {

namespace fs = std::filesystem;
using namespace biped;
using namespace biped::harness;

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::string DefaultConfig() { return std::string(BIPED_DEFAULT_CONFIG_DIR) + "/default.ini"; }

// Flags shared by subcommands that read a run config.
struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::int64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> plant, solver, out;

  void Add(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config, "run config file (default: configs/default.ini)");
    app->add_option("--set", sets, "override a config key, e.g. --set ppo.symmetry_weight=0");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--workers", workers, "rollout worker threads");
    app->add_option("--plant", plant, "training | real-analog")
        ->check(CLI::IsMember({"training", "real-analog"}));
    app->add_option("--solver", solver, "penalty | impulse")
        ->check(CLI::IsMember({"penalty", "impulse"}));
    if (with_out) app->add_option("--out", out, "output directory or file");
  }

  bool explicit_config() const { return !config.empty(); }
  std::string path() const { return config.empty() ? DefaultConfig() : config; }

  KeyValueConfig Raw() const {
    KeyValueConfig raw = KeyValueConfig::FromFile(path());
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || s.find('.') > eq) {
        throw ConfigError("--set '" + s + "': expected section.key=value");
      }
      raw.Set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) raw.Set("run.seed", *seed);
    if (workers) raw.Set("run.workers", *workers);
    if (plant) raw.Set("episode.plant", *plant);
    if (solver) raw.Set("episode.solver", *solver);
    return raw;
  }

  std::string base_dir() const { return fs::path(path()).parent_path().string(); }

  RunConfig Load() const {
    KeyValueConfig raw = Raw();
    if (out) raw.Set("run.out", *out);
    return ParseRunConfig(raw, base_dir());
  }
};

void WriteReport(const nlohmann::json& j, const std::optional<std::string>& out) {
  std::cout << j.dump(2) << '\n';
  if (out) {
    const fs::path p(*out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream(p) << j.dump(2) << '\n';
  }
}

int Train(const ConfigFlags& f) {
  const RunConfig rc = f.Load();
  const fs::path dir = rc.run.out;
  std::cerr << "resolved config written to " << (dir / "config.ini").string() << '\n';
  const TrainResult r = TrainToDirectory(rc, dir, &std::cerr);
  if (r.diverged) {
    std::cerr << "error: " << r.message << " (checkpoints so far kept in " << dir.string()
              << ")\n";
    return kExitDiverged;
  }
  std::cerr << "done: " << r.iterations << " iterations, " << r.samples << " samples\n";
  return 0;
}

struct EvalFlags {
  std::string checkpoint;
  int episodes = 10;
  std::uint64_t eval_seed = 1;
  std::string command, schedule;
  std::optional<std::string> trace;
  bool stochastic = false, flat = false, nominal = false;
};

RunConfig EvalConfig(const ConfigFlags& f, const nn::CheckpointMeta& meta) {
  RunConfig rc = f.Load();
  ApplyCheckpointMeta(meta, rc.env, f.explicit_config());
  return rc;
}

int Eval(const ConfigFlags& f, const EvalFlags& e) {
  const LoadedPolicy policy = LoadPolicy(e.checkpoint);
  RunConfig rc = EvalConfig(f, policy.meta);
  if (e.flat) rc.env.episode.terrain = false;
  if (e.nominal) rc.env.episode.randomize_dynamics = false;
  ppo::EvalOptions opt;
  opt.episodes = e.episodes;
  opt.seed = e.eval_seed;
  opt.deterministic = !e.stochastic;
  if (!e.command.empty()) opt.command = ParseCommand(e.command);
  if (!e.schedule.empty()) opt.schedule = ParseSchedule(e.schedule);
  const HeightField field = ppo::TrainingTerrain(rc.env, DeriveSeed(e.eval_seed, 0xE7A3));
  std::optional<TraceWriter> trace;
  if (e.trace) trace.emplace(*e.trace);
  const ppo::EvalMetrics m = ppo::EvaluatePolicy(
      policy.net, rc.env, field, opt,
      trace ? std::function<void(const ppo::TraceRow&)>(std::ref(*trace))
            : std::function<void(const ppo::TraceRow&)>());
  nlohmann::json j = MetricsJson(m);
  j["checkpoint"] = e.checkpoint;
  j["plant"] = ToString(rc.env.episode.plant);
  j["solver"] = ToString(rc.env.episode.solver);
  WriteReport(j, f.out);
  return 0;
}

int Ablation(const ConfigFlags& f, const std::string& matrix, const std::vector<std::uint64_t>& seeds,
             const EvalFlags& e) {
  AblationOptions opt;
  opt.cells = SelectCells(matrix);
  opt.seeds = seeds;
  opt.root = f.out.value_or("runs/ablation");
  opt.protocol.episodes = e.episodes;
  opt.protocol.seed = e.eval_seed;
  if (!e.command.empty()) opt.protocol.command = ParseCommand(e.command);
  opt.protocol.terrain = !e.flat;
  const KeyValueConfig base = f.Raw();
  // Validate every cell before spending compute on any of them.
  for (const auto& cell : opt.cells) {
    for (std::uint64_t s : seeds) CellConfig(base, cell, s, f.base_dir());
  }
  const auto results = RunAblation(base, opt, &std::cerr, f.base_dir());
  const nlohmann::json report = AblationReport(results);
  fs::create_directories(opt.root);
  std::ofstream(opt.root / "report.json") << report.dump(2) << '\n';
  const std::string table = FormatAblationTable(report);
  std::ofstream(opt.root / "report.txt") << table;
  std::cout << table;
  for (const auto& r : results) {
    if (!r.ok) return 1;
  }
  return 0;
}

int Sim2Sim(const ConfigFlags& f, const EvalFlags& e, bool terrain) {
  const LoadedPolicy policy = LoadPolicy(e.checkpoint);
  const RunConfig rc = EvalConfig(f, policy.meta);
  EvalProtocol p;
  p.episodes = e.episodes;
  p.seed = e.eval_seed;
  p.terrain = terrain;
  p.randomize_dynamics = !e.nominal && rc.env.episode.randomize_dynamics;
  if (!e.command.empty()) p.command = ParseCommand(e.command);
  nlohmann::json j = Sim2SimReport(policy.net, rc, rc.env.episode.plant, p);
  j["checkpoint"] = e.checkpoint;
  WriteReport(j, f.out);
  return 0;
}

int ActuatorFit(const ConfigFlags& f, double tau) {
  const RunConfig rc = f.Load();
  const std::vector<double> speeds = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  const std::vector<double> settles = {0.025, 0.1, 0.5};
  const auto samples = CounterTorqueSweep(rc.env.actuator, tau, speeds, settles);
  const ActuatorParams& p = rc.env.actuator;
  const double quasi_static = p.gear_ratio * p.gear_ratio * p.torque_constant *
                              p.back_emf_constant / (p.resistance + p.current_kp);
  std::cout << "training range: [" << rc.env.episode.bemf.low << ", " << rc.env.episode.bemf.high
            << "] N m s/rad\nproportional-path slope g^2 kT ke / (R + Kp): " << quasi_static
            << " N m s/rad\n\nsettle_s  speed_rad_s  slope_Nms_rad  saturated\n";
  for (const auto& s : samples) {
    std::cout << s.settle << "  " << s.velocity << "  " << s.slope << "  "
              << (s.saturated ? "yes" : "no") << '\n';
  }
  return 0;
}

std::vector<std::uint64_t> ParseSeeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto dash = tok.find('-');
    try {
      if (dash != std::string::npos) {
        const auto a = std::stoull(tok.substr(0, dash)), b = std::stoull(tok.substr(dash + 1));
        for (auto v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(tok));
      }
    } catch (const std::exception&) {
      throw ConfigError("--seeds: bad entry '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError("--seeds: empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar biped sim-to-real training and evaluation harness"};
  app.require_subcommand(1);

  ConfigFlags train_f, eval_f, abl_f, s2s_f, serve_f, fit_f;
  EvalFlags eval_e, abl_e, s2s_e, serve_e;

  auto* train = app.add_subcommand("train", "train a policy to the sample budget");
  train_f.Add(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_f.Add(eval);
  eval->add_option("--checkpoint", eval_e.checkpoint, "policy checkpoint")->required();
  eval->add_option("--episodes", eval_e.episodes, "episodes")->check(CLI::PositiveNumber);
  eval->add_option("--eval-seed", eval_e.eval_seed, "evaluation seed");
  eval->add_option("--command", eval_e.command, "fixed command, e.g. walking:0.3");
  eval->add_option("--schedule", eval_e.schedule,
                   "scripted commands, e.g. 0:standing,80:walking:0.3,240:standing");
  eval->add_option("--trace", eval_e.trace, "per-step trace file");
  eval->add_flag("--stochastic", eval_e.stochastic, "sample actions instead of the mean");
  eval->add_flag("--flat", eval_e.flat, "flat floor");
  eval->add_flag("--nominal", eval_e.nominal, "nominal dynamics (no randomization)");

  std::string matrix = "policies", seeds = "1-5";
  auto* ablation = app.add_subcommand("ablation", "train and compare ablation cells");
  abl_f.Add(ablation);
  ablation->add_option("--matrix", matrix, "policies | architectures | all | name,name,...");
  ablation->add_option("--seeds", seeds, "seed list, e.g. 1-5 or 1,3,7");
  ablation->add_option("--episodes", abl_e.episodes, "evaluation episodes per plant")
      ->check(CLI::PositiveNumber);
  ablation->add_option("--eval-seed", abl_e.eval_seed, "evaluation seed");
  ablation->add_option("--command", abl_e.command, "evaluation command (default walking:0.3)");
  ablation->add_flag("--flat", abl_e.flat, "evaluate on a flat floor");

  bool s2s_terrain = false;
  auto* sim2sim = app.add_subcommand("sim2sim", "evaluate one checkpoint under both solvers");
  s2s_f.Add(sim2sim);
  sim2sim->add_option("--checkpoint", s2s_e.checkpoint, "policy checkpoint")->required();
  sim2sim->add_option("--episodes", s2s_e.episodes, "episodes per solver")
      ->check(CLI::PositiveNumber);
  sim2sim->add_option("--eval-seed", s2s_e.eval_seed, "evaluation seed");
  sim2sim->add_option("--command", s2s_e.command, "command (default walking:0.3)");
  sim2sim->add_flag("--terrain", s2s_terrain, "rough terrain instead of a flat floor");
  sim2sim->add_flag("--nominal", s2s_e.nominal, "nominal dynamics (default when DR is on: randomized)");

  int port = 8765;
  auto* serve = app.add_subcommand("serve", "stream a live policy over a websocket");
  serve_f.Add(serve, false);
  serve->add_option("--checkpoint", serve_e.checkpoint, "policy checkpoint")->required();
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--command", serve_e.command, "initial command (default standing)");
  serve->add_flag("--flat", serve_e.flat, "flat floor");

  double fit_tau = 50.0;
  auto* fit = app.add_subcommand("actuator-fit", "measure the current-loop counter-torque slope");
  fit_f.Add(fit, false);
  fit->add_option("--torque", fit_tau, "commanded joint torque, N m");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return Train(train_f);
    if (*eval) return Eval(eval_f, eval_e);
    if (*ablation) return Ablation(abl_f, matrix, ParseSeeds(seeds), abl_e);
    if (*sim2sim) return Sim2Sim(s2s_f, s2s_e, s2s_terrain);
    if (*fit) return ActuatorFit(fit_f, fit_tau);
    if (*serve) {
      const LoadedPolicy policy = LoadPolicy(serve_e.checkpoint);
      RunConfig rc = EvalConfig(serve_f, policy.meta);
      if (serve_e.flat) rc.env.episode.terrain = false;
      ServeOptions opt;
      opt.port = static_cast<unsigned short>(port);
      if (!serve_e.command.empty()) opt.initial = ParseCommand(serve_e.command);
      return Serve(policy, rc, opt, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
