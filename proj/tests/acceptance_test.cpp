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

// Acceptance checks, one test per criterion. Criteria that need trained
// policies go through the run cache, so they reuse the runs produced by
// `biped ablation` (see README) and only train when a run is missing.
// BIPED_RUNS_DIR overrides the cache root (default: <source>/runs).

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "biped/harness/ablation.hpp"
#include "nn_fixtures.hpp"
#include "sim_fixtures.hpp"

namespace biped {
namespace {

namespace fs = std::filesystem;
using harness::AblationCell;
using harness::CellConfig;
using harness::EnsureTrained;
using harness::EvalProtocol;
using harness::RunConfig;
using harness::RunPaths;
using nn::Matrix;

// ------------------------------------------------------------ reporting

// Prints one verdict line per criterion as each test finishes, plus the
// collected lines once more at the end of the program.
class VerdictPrinter : public ::testing::EmptyTestEventListener {
 public:
  void OnTestEnd(const ::testing::TestInfo& info) override {
    if (std::string(info.test_suite_name()) != "Acceptance") return;
    std::ostringstream line;
    line << std::left << std::setw(44) << info.name()
         << (info.result()->Passed() ? "PASS" : "FAIL");
    const auto it = details_.find(info.name());
    if (it != details_.end()) line << "  " << it->second;
    std::cout << "[criterion] " << line.str() << std::endl;
    lines_.push_back(line.str());
  }
  void OnTestProgramEnd(const ::testing::UnitTest&) override {
    if (lines_.size() < 2) return;
    std::cout << "\nacceptance summary\n";
    for (const auto& l : lines_) std::cout << "  " << l << '\n';
  }
  static void Detail(const std::string& s) {
    details_[::testing::UnitTest::GetInstance()->current_test_info()->name()] = s;
  }

 private:
  std::vector<std::string> lines_;
  static inline std::map<std::string, std::string> details_;
};

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

// ------------------------------------------------------------ run cache

fs::path RunsRoot() {
  if (const char* env = std::getenv("BIPED_RUNS_DIR")) return env;
  return fs::path(BIPED_SOURCE_DIR) / "runs";
}

const std::string kConfigDir = BIPED_DEFAULT_CONFIG_DIR;

KeyValueConfig BaseConfig(const std::vector<std::pair<std::string, std::string>>& sets = {}) {
  KeyValueConfig raw = KeyValueConfig::FromFile(kConfigDir + "/default.ini");
  for (const auto& [k, v] : sets) raw.Set(k, v);
  return raw;
}

AblationCell Cell(const std::string& name) { return harness::SelectCells(name).front(); }

struct Trained {
  RunConfig rc;
  fs::path dir;
  harness::LoadedPolicy policy;
};

// Same config, root and label as `biped ablation --out <root>` would use.
Trained Train(const KeyValueConfig& base, const std::string& cell, std::uint64_t seed,
              const std::string& root) {
  RunConfig rc = CellConfig(base, Cell(cell), seed, kConfigDir);
  const harness::TrainResult r =
      EnsureTrained(rc, RunsRoot() / root, cell + "-s" + std::to_string(seed), &std::cerr);
  if (r.diverged) throw std::runtime_error(cell + " diverged: " + r.message);
  harness::LoadedPolicy p = harness::LoadPolicy(RunPaths{r.dir}.final_checkpoint());
  harness::ApplyCheckpointMeta(p.meta, rc.env, true);
  return {rc, r.dir, std::move(p)};
}

// ------------------------------------------------------------ 1

TEST(Acceptance, C01_FormulaGoldenValues) {
  EXPECT_NEAR(RewardHeight(0.74), std::exp(-0.1), 1e-9);
  EXPECT_NEAR(RewardTracking(0.2, 0.0, {Mode::kWalking, 0.4}).rv, std::exp(-0.4), 1e-9);
  // PD law: 100 * (0.1 - 0) + 5 * (0 - 0.2) = 9, exactly representable.
  EXPECT_EQ(PdTorque(0.1, 0.0, 0.2, 100.0, 5.0), 9.0);
  EXPECT_EQ(PdTorque(0.3, 0.3, 0.0, 100.0, 5.0), 0.0);
  // Counter-torque: 9 - 20 * 0.25 = 4.
  EXPECT_EQ(ApplyBemf(9.0, 0.25, 20.0), 4.0);
  EXPECT_EQ(ApplyBemf(9.0, 0.25, 0.0), 9.0);
  EXPECT_EQ(RewardWeights{}.Sum(), 1.0);
}

// ------------------------------------------------------------ 2

std::vector<double> UnrolledAdvantages(const std::vector<double>& r, const std::vector<double>& v,
                                       const ppo::EpisodeSegment& s, double gamma,
                                       double lambda) {
  std::vector<double> out(s.length);
  for (int t = 0; t < s.length; ++t) {
    double sum = 0.0, weight = 1.0;
    for (int k = t; k < s.length; ++k, weight *= gamma * lambda) {
      const double next = k + 1 < s.length ? v[s.start + k + 1] : s.bootstrap_value;
      sum += weight * (r[s.start + k] + gamma * next - v[s.start + k]);
    }
    out[t] = sum;
  }
  return out;
}

TEST(Acceptance, C02_GradientAndAdvantageOracles) {
  double worst_grad = 0.0;
  for (nn::Architecture a : {nn::Architecture::kFeedForward, nn::Architecture::kFeedForwardHistory,
                             nn::Architecture::kRecurrent}) {
    const double err = nn::testing::CheckGradients(nn::testing::SmallSpec(a), 3, 3, 21);
    EXPECT_LT(err, 1e-4) << nn::ToString(a);
    worst_grad = std::max(worst_grad, err);
  }
  Rng rng(5);
  std::normal_distribution<double> n;
  double worst_gae = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> r, v;
    std::vector<ppo::EpisodeSegment> segs;
    for (int e = 0; e < 1 + trial % 3; ++e) {
      const int len = 1 + static_cast<int>(rng() % 5);
      segs.push_back({static_cast<int>(r.size()), len, rng() % 2 ? n(rng) : 0.0});
      for (int t = 0; t < len; ++t) {
        r.push_back(n(rng));
        v.push_back(n(rng));
      }
    }
    const double gamma = Uniform(rng, 0.9, 1.0), lambda = Uniform(rng, 0.0, 1.0);
    const ppo::GaeResult g = ppo::ComputeGae(r, v, segs, gamma, lambda);
    for (const auto& s : segs) {
      const auto oracle = UnrolledAdvantages(r, v, s, gamma, lambda);
      for (int t = 0; t < s.length; ++t) {
        worst_gae = std::max(worst_gae, std::abs(g.advantages[s.start + t] - oracle[t]));
      }
    }
  }
  EXPECT_LE(worst_gae, 1e-12);
  VerdictPrinter::Detail(Fmt("grad rel err %.2e, gae abs err %.2e", worst_grad, worst_gae));
}

// ------------------------------------------------------------ 3

double BallisticHeightError(double dt) {
  const RobotModel m = DefaultRobotModel();
  PlantState s = testing::NominalState(m, 2.0);
  s.qd[kRootX] = 0.3;
  s.qd[kRootZ] = 1.5;
  const double z0 = s.q[kRootZ];
  ContactMemory mem;
  const int steps = static_cast<int>(std::lround(0.5 / dt));
  for (int i = 0; i < steps; ++i) {
    StepDynamics(s, mem, JointVector::Zero(), HeightField::Flat(), m, dt, ContactSolver::kPenalty,
                 {kGravity, false});
  }
  const double t = steps * dt;
  return std::abs(s.q[kRootZ] - (z0 + 1.5 * t - 0.5 * kGravity * t * t));
}

TEST(Acceptance, C03_PhysicsProperties) {
  const RobotModel m = DefaultRobotModel();
  Rng rng(31);

  // Momentum without gravity or contact.
  PlantState s = testing::RandomState(m, rng);
  s.q[kRootZ] = 3.0;
  ContactMemory mem;
  const Vec2 p0 = LinearMomentum(s, m);
  for (int i = 0; i < 1000; ++i) {
    StepDynamics(s, mem, JointVector::Zero(), HeightField::Flat(), m, 1e-3,
                 ContactSolver::kPenalty, {0.0, false});
  }
  const double drift = (LinearMomentum(s, m) - p0).norm();
  EXPECT_LT(drift, 1e-10);

  // First-order convergence.
  const double ratio = BallisticHeightError(1e-3) / BallisticHeightError(5e-4);
  EXPECT_NEAR(ratio, 2.0, 0.2);

  // Cone (impulse, exact) and unilateral normals (both solvers), landing
  // while sliding under random torques.
  int cone_violations = 0, negative_normals = 0, contacts = 0;
  for (ContactSolver solver : {ContactSolver::kImpulse, ContactSolver::kPenalty}) {
    PlantState start = testing::NominalState(m, 0.0);
    PlaceOnGround(start, m, HeightField::Flat());
    start.q[kRootZ] += 0.03;
    start.qd[kRootX] = 1.2;
    Simulator sim(m, HeightField::Flat(), solver);
    sim.Reset(start);
    for (int i = 0; i < 2000; ++i) {
      JointVector tau = testing::GravityCompensation(sim.state(), m);
      for (int j = 0; j < kNumJoints; ++j) tau[j] += Uniform(rng, -40.0, 40.0);
      const ContactResult& c = sim.Step(tau, 1e-3);
      for (const auto& p : c.points) {
        negative_normals += p.normal < 0.0;
        contacts += p.normal > 0.0;
        if (solver == ContactSolver::kImpulse) {
          cone_violations += std::abs(p.tangential) > m.contact.friction * p.normal;
        }
      }
    }
  }
  EXPECT_EQ(cone_violations, 0);
  EXPECT_EQ(negative_normals, 0);
  EXPECT_GT(contacts, 0);
  VerdictPrinter::Detail(Fmt("momentum drift %.1e, error ratio %.3f, cone violations %.0f",
                             drift, ratio, cone_violations));
}

// ------------------------------------------------------------ 4

TEST(Acceptance, C04_TrainingImprovesStanding) {
  const Trained t = Train(BaseConfig(), "PolicyC", 1, "ablation");
  const auto metrics = harness::ReadJsonLines(RunPaths{t.dir}.metrics());
  ASSERT_GE(metrics.size(), 2u);
  const double first = metrics.front()["mode_return"]["standing"].get<double>();
  const double last = metrics.back()["mode_return"]["standing"].get<double>();
  EXPECT_GE(last, 3.0 * first);

  EvalProtocol p;
  p.command = {Mode::kStanding, 0.0};
  const ppo::EvalMetrics m = harness::RunProtocol(
      t.policy.net, harness::EvalEnv(t.rc, PlantKind::kTraining, t.rc.env.episode.solver, p), p);
  EXPECT_GE(m.truncations, 9);
  VerdictPrinter::Detail(Fmt("standing return %.1f -> %.1f (x%.2f), truncated %.0f/10", first,
                             last, last / first, m.truncations));
}

// ------------------------------------------------------------ 5

TEST(Acceptance, C05_CounterTorqueAblation) {
  harness::AblationOptions opt;
  opt.cells = harness::SelectCells("PolicyC,PolicyA,PolicyB");
  opt.seeds = {1, 2, 3, 4, 5};
  opt.root = RunsRoot() / "ablation";
  const auto results = harness::RunAblation(BaseConfig(), opt, &std::cerr, kConfigDir);
  std::map<std::uint64_t, std::map<std::string, const harness::CellResult*>> by_seed;
  for (const auto& r : results) {
    ASSERT_TRUE(r.ok) << r.cell << " seed " << r.seed << ": " << r.error;
    by_seed[r.seed][r.cell] = &r;
  }
  int ttf_ok = 0, rmse_ok = 0;
  std::vector<double> ttf_a, ttf_b, ttf_c, rmse_b, rmse_c;
  for (const auto& [seed, cells] : by_seed) {
    const ppo::EvalMetrics& a = cells.at("PolicyA")->real;
    const ppo::EvalMetrics& b = cells.at("PolicyB")->real;
    const ppo::EvalMetrics& c = cells.at("PolicyC")->real;
    ttf_ok += c.median_time_to_fall > a.median_time_to_fall &&
              c.median_time_to_fall > b.median_time_to_fall;
    rmse_ok += c.tracking_rmse.mean < b.tracking_rmse.mean;
    ttf_a.push_back(a.median_time_to_fall);
    ttf_b.push_back(b.median_time_to_fall);
    ttf_c.push_back(c.median_time_to_fall);
    rmse_b.push_back(b.tracking_rmse.mean);
    rmse_c.push_back(c.tracking_rmse.mean);
    std::cout << "  seed " << seed << "  real-analog median steps-to-fall A "
              << a.median_time_to_fall << "  B " << b.median_time_to_fall << "  C "
              << c.median_time_to_fall << "  | tracking rmse B " << b.tracking_rmse.mean << "  C "
              << c.tracking_rmse.mean << '\n';
  }
  const double ma = ppo::Summarize(ttf_a).mean, mb = ppo::Summarize(ttf_b).mean,
               mc = ppo::Summarize(ttf_c).mean;
  EXPECT_GT(mc, ma);
  EXPECT_GT(mc, mb);
  EXPECT_LT(ppo::Summarize(rmse_c).mean, ppo::Summarize(rmse_b).mean);
  EXPECT_GE(ttf_ok, 4);
  EXPECT_GE(rmse_ok, 4);
  VerdictPrinter::Detail(Fmt("ttf A/B/C %.0f/%.0f/%.0f, seeds ordered: ttf %.0f/5", ma, mb, mc,
                             ttf_ok) +
                         Fmt(", rmse %.0f/5", rmse_ok));
}

// ------------------------------------------------------------ 6

TEST(Acceptance, C06_SymmetryLossShrinksMirrorDefect) {
  const Trained with = Train(BaseConfig(), "PolicyC", 1, "ablation");
  const Trained without =
      Train(BaseConfig({{"ppo.symmetry_weight", "0"}}), "PolicyC", 1, "symmetry");
  ASSERT_EQ(with.rc.ppo.symmetry_weight, 4.0);
  ASSERT_EQ(without.rc.ppo.symmetry_weight, 0.0);

  // Held-out set: inputs visited by both policies on evaluation seeds and
  // terrain neither trained on, all modes sampled.
  ppo::EvalOptions eval;
  eval.episodes = 10;
  eval.seed = 1001;
  eval.collect_inputs = true;
  const HeightField field = ppo::TrainingTerrain(with.rc.env, DeriveSeed(1001, 0xE7A3));
  const Matrix<float> a = ppo::EvaluatePolicy(with.policy.net, with.rc.env, field, eval).inputs;
  const Matrix<float> b =
      ppo::EvaluatePolicy(without.policy.net, without.rc.env, field, eval).inputs;
  Matrix<float> held_out(a.rows(), a.cols() + b.cols());
  held_out << a, b;

  const ppo::MirrorSpec mirror = ppo::MirrorSpec::ForLayout(with.rc.env.episode.cycle_period);
  const double d_with = ppo::Median(ppo::MirrorDefects<float>(with.policy.net, mirror, held_out));
  const double d_without =
      ppo::Median(ppo::MirrorDefects<float>(without.policy.net, mirror, held_out));
  EXPECT_GE(d_without, 5.0 * d_with);
  VerdictPrinter::Detail(Fmt("median defect w=4 %.4f, w=0 %.4f (x%.1f) over %.0f inputs", d_with,
                             d_without, d_without / d_with, held_out.cols()));
}

// ------------------------------------------------------------ 7

TEST(Acceptance, C07_PenaltyPolicyWalksUnderImpulseSolver) {
  const Trained t = Train(BaseConfig(), "PolicyC", 1, "ablation");
  ASSERT_EQ(t.rc.env.episode.solver, ContactSolver::kPenalty);
  EvalProtocol p;
  p.terrain = false;
  p.command = {Mode::kWalking, 0.3};
  const ppo::EvalMetrics impulse = harness::RunProtocol(
      t.policy.net, harness::EvalEnv(t.rc, PlantKind::kTraining, ContactSolver::kImpulse, p), p);
  const ppo::EvalMetrics penalty = harness::RunProtocol(
      t.policy.net, harness::EvalEnv(t.rc, PlantKind::kTraining, ContactSolver::kPenalty, p), p);
  EXPECT_GE(impulse.truncations, 8);
  VerdictPrinter::Detail(Fmt("truncated impulse %.0f/10 (penalty %.0f/10), mean length %.0f vs %.0f",
                             impulse.truncations, penalty.truncations, impulse.length.mean,
                             penalty.length.mean));
}

// ------------------------------------------------------------ 8

TEST(Acceptance, C08_RandomizationRanges) {
  const int n = 10000;
  const RobotModel nominal = DefaultRobotModel();
  const DynamicsRandomization r;
  Rng rng(81);
  std::vector<double> mass, com, fs, fv;
  for (int i = 0; i < n; ++i) {
    const RobotModel m = RandomizeDynamics(nominal, r, rng);
    for (int l = 0; l < kNumLinks; ++l) {
      mass.push_back(m.links[l].mass / nominal.links[l].mass);
      const Vec2 d = m.links[l].com - nominal.links[l].com;
      com.push_back(d.x());
      com.push_back(d.y());
    }
    for (int j = 0; j < kNumJoints; ++j) {
      fs.push_back(m.joints[j].static_friction);
      fv.push_back(m.joints[j].viscous_friction);
    }
  }
  const auto check = [](const std::vector<double>& xs, double lo, double hi, const char* what) {
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    EXPECT_GE(*mn, lo) << what;
    EXPECT_LE(*mx, hi) << what;
    // Mean within 2% of the uniform expectation, relative to the range
    // width when the expectation is zero.
    const double expect = 0.5 * (lo + hi);
    const double scale = expect != 0.0 ? std::abs(expect) : hi - lo;
    EXPECT_NEAR(ppo::Summarize(xs).mean, expect, 0.02 * scale) << what;
  };
  // Tiny slack for the product in mass * U[0.95, 1.05] / mass.
  check(mass, 0.95 - 1e-12, 1.05 + 1e-12, "mass ratio");
  check(com, -0.05, 0.05, "com offset");
  check(fs, 2.0, 8.0, "static friction");
  check(fv, 0.5, 5.0, "viscous friction");

  // Counter-torque gain: draws in range, held for exactly 100 ms.
  ActuatorChain chain({}, {}, PlantKind::kTraining);
  chain.Reset(rng);
  std::vector<double> k;
  JointVector held = chain.state().k_bemf;
  int wrong_changes = 0, changes = 0;
  for (int ms = 1; k.size() < static_cast<std::size_t>(n); ++ms) {
    chain.Step(JointVector::Zero(), JointVector::Zero(), JointVector::Zero(), 1e-3, rng);
    const JointVector now = chain.state().k_bemf;
    if (now != held) {
      ++changes;
      wrong_changes += ms % 100 != 0;
      for (int j = 0; j < kNumJoints; ++j) k.push_back(now[j]);
      held = now;
    } else if (ms % 100 == 0) {
      ++wrong_changes;  // a boundary without a redraw
    }
  }
  check(k, 5.0, 40.0, "k_bemf");
  EXPECT_EQ(wrong_changes, 0);

  // Terrain fields never exceed 3.5 cm.
  const TerrainParams tp;
  double highest = 0.0, lowest = 0.0;
  for (int i = 0; i < n; ++i) {
    const HeightField hf = GenerateHeightField(tp, rng);
    const auto [mn, mx] = std::minmax_element(hf.elevation().begin(), hf.elevation().end());
    highest = std::max(highest, *mx);
    lowest = std::min(lowest, *mn);
  }
  EXPECT_LE(highest, 0.035);
  EXPECT_GE(lowest, 0.0);
  VerdictPrinter::Detail(Fmt("k_bemf mean %.3f over %.0f draws, terrain max %.4f m",
                             ppo::Summarize(k).mean, k.size(), highest));
}

// ------------------------------------------------------------ 9

double SecondsPerIteration(const std::string& arch) {
  KeyValueConfig raw = BaseConfig({{"network.architecture", arch},
                                   {"ppo.rollouts_per_batch", "16"},
                                   {"episode.terminations", "false"}});
  ppo::Trainer trainer(harness::ParseRunConfig(raw, kConfigDir).TrainOptions());
  std::vector<double> s;
  for (int i = 0; i < 4; ++i) {
    const ppo::IterationRecord rec = trainer.Iterate();
    EXPECT_EQ(rec.timing["samples"].get<int>(), 16 * 400);
    if (i > 0) s.push_back(rec.timing["iteration_s"].get<double>());  // first one warms up
  }
  return ppo::Median(s);
}

TEST(Acceptance, C09_ArchitectureCostAndCurves) {
  const double ff = SecondsPerIteration("ff");
  const double lstm = SecondsPerIteration("lstm");
  EXPECT_GE(lstm, 2.0 * ff);

  // Learning curves: ff and ff-history, 5 seeds, first 200 iterations.
  const KeyValueConfig base =
      BaseConfig({{"ppo.rollouts_per_batch", "16"}, {"run.max_iterations", "200"}});
  const int iterations = 200;
  std::map<std::string, std::vector<std::vector<double>>> curves;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const char* cell : {"ff-dr", "ff-history-dr"}) {
      const Trained t = Train(base, cell, seed, "curves");
      const auto metrics = harness::ReadJsonLines(RunPaths{t.dir}.metrics());
      ASSERT_EQ(metrics.size(), static_cast<std::size_t>(iterations)) << cell << " seed " << seed;
      std::vector<double> c;
      for (const auto& m : metrics) c.push_back(m["mean_return"].get<double>());
      curves[cell].push_back(c);
    }
  }
  int disjoint = 0;
  double worst_gap = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> x, y;
    for (const auto& c : curves["ff-dr"]) x.push_back(c[it]);
    for (const auto& c : curves["ff-history-dr"]) y.push_back(c[it]);
    const ppo::MeanStd a = ppo::Summarize(x), b = ppo::Summarize(y);
    const double gap = std::abs(a.mean - b.mean) - (a.std + b.std);
    worst_gap = std::max(worst_gap, gap);
    disjoint += gap > 0.0;
  }
  EXPECT_EQ(disjoint, 0);
  VerdictPrinter::Detail(Fmt("s/iter ff %.2f lstm %.2f (x%.2f); bands disjoint at %.0f/200",
                             ff, lstm, lstm / ff, disjoint));
}

// ------------------------------------------------------------ 10

TEST(Acceptance, C10_InferenceLatency) {
  nn::ActorCritic<float> net(nn::NetworkSpec::Default(nn::Architecture::kFeedForward));
  Rng rng(10);
  net.Init(rng);
  Matrix<float> x = Matrix<float>::Random(kObservationSize, 1);
  nn::Carry<float> carry;
  std::vector<Matrix<float>> means;
  std::vector<double> us;
  for (int i = 0; i < 5000; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    net.ForwardActor({x}, carry, means, nullptr);
    us.push_back(
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
    x(0, 0) = means[0](0, 0);
  }
  const double median = ppo::Median(us);
  EXPECT_LT(median, 1000.0);
  VerdictPrinter::Detail(Fmt("median forward %.1f us", median));
}

}  // namespace
}  // namespace biped

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new biped::VerdictPrinter);
  return RUN_ALL_TESTS();
}
