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

// State-stream protocol (JSON text frames, version 1) and the session that
// drives a policy for it. The session has no networking; serve.hpp carries
// its frames over a websocket.
//
// Server -> client
//   {"type":"handshake","version":1,"control_dt":s,"joint_names":[6],
//    "link_names":[7],"modes":["walking","stepping","standing"],
//    "ranges":{"walking":[lo,hi],"stepping":[lo,hi],"standing":[0,0]},
//    "geometry":{"links":[{"name","length","mass","com":[x,z]}],
//                "heel":[x,z],"toe":[x,z],"hip_width":m},
//    "terrain":{"spacing":m,"offset":m,"elevation":[m...]},
//    "command":{"mode","reference"}}
//   {"type":"reset","episode":n,"time":s,"terrain":{...}}   new episode
//   {"type":"state","seq":n,"time":s,"episode":n,"step":n,
//    "links":[{"name","x","z","angle"}],
//    "contacts":[{"foot":"left"|"right","normal":N,"tangential":N,"in_contact":b}],
//    "reward":{"grf",...,"jv","total"},"tau_pd":[6],"tau_applied":[6],
//    "mode","reference","mode_one_hot":[3],"done":b,"reason":s}
//   {"type":"ack","mode","reference","applies_at_step":n}
//   {"type":"error","code":"bad_json"|"bad_command"|"out_of_range","message":s}
// Client -> server
//   {"type":"command","mode":"walking","reference":0.3}   ("type" optional)
//
// Commands are queued and applied at the next control-step boundary, so the
// first state frame after an ack already carries the new mode.

#pragma once

#include <cmath>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biped/env/environment.hpp"
#include "biped/ppo/evaluate.hpp"
#include "biped/sim/kinematics.hpp"

namespace biped::harness {

inline constexpr int kStreamProtocolVersion = 1;

inline nlohmann::json ErrorFrame(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

inline nlohmann::json TerrainJson(const HeightField& f) {
  return {{"spacing", f.spacing()}, {"offset", f.offset()}, {"elevation", f.elevation()}};
}

inline nlohmann::json CommandJson(const ModeCommand& c) {
  return {{"mode", ToString(c.mode)}, {"reference", c.reference}};
}

/// Parses a command frame. On failure `error` holds the error frame.
inline bool ParseCommandFrame(const std::string& text, ModeCommand& out, nlohmann::json& error) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    error = ErrorFrame("bad_json", e.what());
    return false;
  }
  if (!j.is_object()) {
    error = ErrorFrame("bad_command", "expected a JSON object");
    return false;
  }
  if (j.contains("type") && j["type"] != "command") {
    error = ErrorFrame("bad_command", "unsupported message type");
    return false;
  }
  if (!j.contains("mode") || !j["mode"].is_string()) {
    error = ErrorFrame("bad_command", "missing string field 'mode'");
    return false;
  }
  ModeCommand c;
  try {
    c.mode = ParseMode(j["mode"].get<std::string>());
  } catch (const ConfigError& e) {
    error = ErrorFrame("bad_command", e.what());
    return false;
  }
  if (j.contains("reference")) {
    if (!j["reference"].is_number()) {
      error = ErrorFrame("bad_command", "'reference' must be a number");
      return false;
    }
    c.reference = j["reference"].get<double>();
  }
  const std::string why = CommandError(c);
  if (!why.empty()) {
    error = ErrorFrame("out_of_range", why);
    return false;
  }
  out = c;
  return true;
}

class StreamSession {
 public:
  StreamSession(const nn::ActorCritic<float>& net, EnvConfig cfg, HeightField field,
                std::uint64_t seed, ModeCommand initial = {})
      : env_(std::move(cfg), std::move(field), seed), runner_(net), active_(initial) {
    const std::string why = CommandError(initial);
    if (!why.empty()) throw ConfigError("initial command: " + why);
    ResetEpisode();
  }

  nlohmann::json Handshake() const {
    const RobotModel& m = env_.model();
    nlohmann::json links = nlohmann::json::array();
    for (int i = 0; i < kNumLinks; ++i) {
      const LinkParams& l = m.links[i];
      links.push_back({{"name", kLinkNames[i]},
                       {"length", l.length},
                       {"mass", l.mass},
                       {"com", {l.com.x(), l.com.y()}}});
    }
    return {{"type", "handshake"},
            {"version", kStreamProtocolVersion},
            {"control_dt", env_.config().episode.ControlDt()},
            {"joint_names", kJointNames},
            {"link_names", kLinkNames},
            {"modes", {"walking", "stepping", "standing"}},
            {"ranges",
             {{"walking", {kWalkingSpeedMin, kWalkingSpeedMax}},
              {"stepping", {-kTurnRateMax, kTurnRateMax}},
              {"standing", {0.0, 0.0}}}},
            {"geometry",
             {{"links", links},
              {"heel", {m.heel.x(), m.heel.y()}},
              {"toe", {m.toe.x(), m.toe.y()}},
              {"hip_width", m.hip_width}}},
            {"terrain", TerrainJson(env_.terrain())},
            {"command", CommandJson(active_)}};
  }

  /// Handles one client text frame; returns an ack or an error frame.
  /// Safe to call from a thread other than the one calling Step().
  nlohmann::json HandleMessage(const std::string& text) {
    ModeCommand c;
    nlohmann::json error;
    if (!ParseCommandFrame(text, c, error)) return error;
    std::lock_guard<std::mutex> lock(mu_);
    pending_.push_back(c);
    nlohmann::json ack = CommandJson(c);
    ack["type"] = "ack";
    ack["applies_at_step"] = total_steps_;
    return ack;
  }

  /// One control step: applies queued commands, acts, steps the plant and
  /// returns the state frame (followed by a reset frame when the episode
  /// ended).
  std::vector<nlohmann::json> Step() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!pending_.empty()) {
        active_ = pending_.back();
        pending_.clear();
        env_.SetCommand(active_);
        runner_.Replace(env_.observation());
      }
    }
    const JointVector a = runner_.Act();
    const StepResult& r = env_.Step(a);
    ++total_steps_;
    std::vector<nlohmann::json> out;
    out.push_back(StateFrame(r));
    if (r.done()) {
      ++episode_;
      ResetEpisode();
      out.push_back({{"type", "reset"},
                     {"episode", episode_},
                     {"time", Time()},
                     {"terrain", TerrainJson(env_.terrain())}});
    } else {
      runner_.Observe(env_.observation());
    }
    return out;
  }

  const ModeCommand& active() const { return active_; }
  const LocomotionEnv& env() const { return env_; }
  double Time() const { return total_steps_ * env_.config().episode.ControlDt(); }

 private:
  void ResetEpisode() {
    env_.Reset();
    env_.SetCommand(active_);
    runner_.Reset(env_.observation());
  }

  nlohmann::json StateFrame(const StepResult& r) const {
    const PlantState& s = env_.plant();
    const LinkFrames f(s, env_.model());
    nlohmann::json links = nlohmann::json::array();
    for (int i = 0; i < kNumLinks; ++i) {
      links.push_back({{"name", kLinkNames[i]},
                       {"x", f.origin(i).x()},
                       {"z", f.origin(i).y()},
                       {"angle", f.angle(i)}});
    }
    nlohmann::json contacts = nlohmann::json::array();
    const ContactResult& c = env_.contact();
    for (int foot = 0; foot < 2; ++foot) {
      contacts.push_back({{"foot", foot == 0 ? "left" : "right"},
                          {"normal", c.feet[foot].normal},
                          {"tangential", c.feet[foot].tangential},
                          {"in_contact", c.feet[foot].in_contact}});
    }
    const RewardBreakdown& p = r.parts;
    const std::array<double, kNumRewardTerms> terms = p.Terms();
    nlohmann::json reward;
    for (int t = 0; t < kNumRewardTerms; ++t) reward[kRewardTermNames[t]] = terms[t];
    reward["total"] = p.total;
    const ActuatorState& act = env_.actuator();
    const Observation& o = env_.observation();
    return {{"type", "state"},
            {"seq", total_steps_},
            {"time", Time()},
            {"episode", episode_},
            {"step", env_.step_count()},
            {"links", links},
            {"contacts", contacts},
            {"reward", reward},
            {"tau_pd", std::vector<double>(act.tau_pd.data(), act.tau_pd.data() + kNumJoints)},
            {"tau_applied",
             std::vector<double>(act.tau_applied.data(), act.tau_applied.data() + kNumJoints)},
            {"mode", ToString(active_.mode)},
            {"reference", active_.reference},
            {"mode_one_hot", {o[obs::kMode], o[obs::kMode + 1], o[obs::kMode + 2]}},
            {"done", r.done()},
            {"reason", ToString(r.termination.reason)}};
  }

  LocomotionEnv env_;
  ppo::PolicyRunner runner_;
  ModeCommand active_;
  std::mutex mu_;
  std::deque<ModeCommand> pending_;
  long total_steps_ = 0;
  int episode_ = 0;
};

}  // namespace biped::harness
