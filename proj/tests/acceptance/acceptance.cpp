// Acceptance gate: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; `acceptance 4 8` runs a subset. Exit status is the number of
// failed criteria.
//
// Training runs are desk scale (64 envs, width 64, 2M env steps) on a single
// thread, and are cached so criteria that share a configuration train it once.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/choreography/plan_check.hpp"
#include "dexdrum/evalkit/matrix.hpp"
#include "dexdrum/learner/oracles.hpp"
#include "dexdrum/rewards_obs/observation.hpp"
#include "dexdrum/rewards_obs/rewards.hpp"
#include "support/genres.hpp"
#include "support/planner_checks.hpp"

using namespace dexdrum;
using learn::RolloutMode;

namespace {

// Pinned tolerances and budgets.
constexpr double kFormulaTol = 1e-9;
constexpr double kGaeTol = 1e-12;
constexpr int kGaeMaxLen = 6;
constexpr double kGradRelTol = 1e-4;
constexpr int kGradNets = 100;
constexpr double kBanditTarget = 0.95;
constexpr int kBanditUpdates = 200;
constexpr double kContactTol = 1e-9;
constexpr double kRigidTol = 1e-6;
constexpr int kDeskEnvs = 64;
constexpr int kDeskWidth = 64;
constexpr long kDeskSteps = 2'000'000;
constexpr double kTrainedF1 = 0.9;
constexpr double kHoldGap = 0.1;
constexpr double kCurriculumRatio = 1.5;
constexpr double kNoiseStdLo = 0.049, kNoiseStdHi = 0.051;
constexpr long kNoiseSamples = 100'000;
constexpr long kCurriculumSteps = 10'000;
const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Tasks

// Single-drum snare exercise filling a 400-step episode.
std::shared_ptr<const learn::Task> exercise(double bpm) {
  learn::TaskConfig tc;
  const int n = static_cast<int>((tc.episode_steps / 20.0 - 1.0) * bpm / 60.0) + 1;
  return std::make_shared<learn::Task>(
      learn::make_task(tc, score::generate_exercise(bpm, n, score::DrumId::kSnare)));
}

score::DrumScore hat_snare(const std::string& pattern) {
  return score::sequence_score(pattern, {{'c', score::DrumId::kHiHat}, {'d', score::DrumId::kSnare}},
                               1.0, 1.0);
}

// ccdd repeated over a 400-step episode: one hand moving between hi-hat and snare.
std::shared_ptr<const learn::Task> ccdd_loop() {
  learn::TaskConfig tc;
  std::string p;
  while (p.size() < 20) p += "ccdd";
  return std::make_shared<learn::Task>(learn::make_task(tc, hat_snare(p)));
}

// The short training sequence and its unseen doubling, with per-episode
// domain randomization.
std::shared_ptr<const learn::Task> randomized_sequence(const std::string& pattern) {
  learn::TaskConfig tc;
  tc.world.randomize = true;
  tc.episode_steps = 20 * (static_cast<int>(pattern.size()) + 2);
  return std::make_shared<learn::Task>(learn::make_task(tc, hat_snare(pattern)));
}

// ---------------------------------------------------------------------------
// Training cache

struct Trained {
  std::shared_ptr<const learn::Agent> policy;
  learn::ControlConfig control;
};

std::map<std::string, Trained> g_cache;
double g_train_seconds = 0.0;

learn::ControlConfig control_named(const std::string& variant) {
  learn::ControlConfig c;
  if (variant == "fixed") return learn::control_for(RolloutMode::kFixedGrasp, c);
  if (variant == "arm") return learn::control_for(RolloutMode::kArmDriven, c);
  if (variant == "no_curriculum") c.curriculum = false;
  if (variant == "scratch") c.plan = learn::PlanSource::kNone;
  return c;
}

const Trained& trained(const std::string& task_key, const std::shared_ptr<const learn::Task>& task,
                       const std::string& variant, std::uint64_t seed) {
  const std::string key = task_key + "/" + variant + "/" + std::to_string(seed);
  if (auto it = g_cache.find(key); it != g_cache.end()) return it->second;
  learn::TrainConfig cfg;
  cfg.n_envs = kDeskEnvs;
  cfg.hidden_width = kDeskWidth;
  cfg.total_steps = kDeskSteps;
  cfg.seed = seed;
  cfg.eval_episodes = 0;
  cfg.control = control_named(variant);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = learn::train(*task, cfg);
  const double dt = seconds_since(t0);
  g_train_seconds += dt;
  std::cerr << "  trained " << key << " in " << fmt(dt, 3) << " s\n";
  return g_cache[key] = Trained{std::make_shared<learn::Agent>(std::move(res.policy)), cfg.control};
}

// Mean metrics over policies trained with seeds 0..4, each evaluated once
// (with seed = training seed) in `mode`.
eval::CellSummary cell(const std::string& name, const std::string& task_key,
                       const std::shared_ptr<const learn::Task>& task, const std::string& variant,
                       RolloutMode mode) {
  std::vector<eval::MatrixRow> rows;
  eval::Experiment ex;
  ex.name = name;
  ex.task = task;
  ex.mode = mode;
  for (auto seed : kSeeds) {
    eval::Experiment one = ex;
    if (mode == RolloutMode::kPlanOnly) {
      one.control = control_named(variant);
    } else {
      const auto& t = trained(task_key, task, variant, seed);
      one.policy = t.policy;
      one.control = t.control;
    }
    one.seeds = {seed};
    one.record_seed = seed;
    auto r = eval::run_experiment(one);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return eval::summarize(ex, rows);
}

// ---------------------------------------------------------------------------
// Criteria

Outcome formulas() {
  using namespace reward;
  double worst = 0.0;
  auto near = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const double g05 = std::exp(-0.5), g45 = std::exp(-4.5);
  near(shaping_g(0.0, 0.05), 1.0);
  near(shaping_g(0.05, 0.05), g05);
  near(shaping_g(0.15, 0.05), g45);
  near(fingertip_reward(1, 1e-6), std::exp(-1.0 / 1.000001));
  near(fingertip_reward(5, 1e-6), std::exp(-1.0 / 5.000001));
  const Vec3 f(0.1, 0.2, 0.3);
  near(fulcrum_reward(f, f, f, 0.05), 1.0);
  near(fulcrum_reward(f + Vec3(0.04, 0, 0), f + Vec3(0, 0.06, 0), f, 0.05), g05);
  near(fulcrum_reward(f + Vec3(0, 0, 0.2), f - Vec3(0.1, 0, 0), f, 0.05), g45);
  near(arm_penalty(Vec3::Zero(), Vec3::Zero()), 0.0);
  near(arm_penalty(Vec3(1, 2, 2), Vec3::Zero()), 3.0);
  near(arm_penalty(Vec3::Zero(), Vec3(0.3, 0.4, 0)), 0.5);
  const Vec3 h(0, 0, 0), t(0, -0.4, 0);
  near(trajectory_reward(false, h, t, h, t, 0.05), 0.0);
  near(trajectory_reward(true, h, t, h, t, 0.05), 1.0);
  near(trajectory_reward(true, h + Vec3(0.05, 0, 0), t, h, t, 0.05), std::exp(-0.125));
  RewardBreakdown p;
  p.fingertip = 0.2;
  p.fulcrum = 0.3;
  p.arm_penalty = 3.0;
  p.trajectory = 0.5;
  p.drum_hit = 1.0;
  near(total_reward(p), 0.2 + 0.3 - 0.09 + 1.0 + 1.0);
  const RewardWeights w;
  const bool weights = w.fingertip == 1.0 && w.fulcrum == 1.0 && w.arm == 0.03 &&
                       w.trajectory == 2.0 && w.hit == 1.0;
  return {worst <= kFormulaTol && weights,
          "max abs err " + fmt(worst) + (weights ? ", weights exact" : ", weights differ")};
}

Outcome learner_numerics() {
  const double gae = learn::oracle::gae_max_error(5000, kGaeMaxLen, 11);
  const double grad = learn::oracle::ppo_gradient_max_error(kGradNets, 12);
  int reached = 0;
  int worst_updates = 0;
  for (auto s : kSeeds) {
    const auto b = learn::oracle::run_bandit(s, kBanditUpdates, kBanditTarget);
    reached += b.reached;
    worst_updates = std::max(worst_updates, b.updates);
  }
  return {gae <= kGaeTol && grad < kGradRelTol && reached == 5,
          "gae err " + fmt(gae) + ", grad rel err " + fmt(grad) + ", bandit " +
              std::to_string(reached) + "/5 (max " + std::to_string(worst_updates) + " updates)"};
}

Outcome planner_contract() {
  double contact = 0.0, rigid = 0.0;
  bool continuous = true, complete = true;
  std::size_t hits = 0;
  for (const auto& g : fixtures::genre_batch()) {
    const auto r = fixtures::plan_song(g.smf);
    complete = complete && r.n_hits > 0;
    hits += r.n_hits;
    contact = std::max(contact, r.max_contact_error);
    rigid = std::max(rigid, r.max_rigid_error);
    continuous = continuous && r.continuous;
  }
  return {complete && continuous && contact <= kContactTol && rigid <= kRigidTol,
          std::to_string(hits) + " hits in 6 genres, contact err " + fmt(contact) + " m, rigid err " +
              fmt(rigid) + " m" + (continuous ? "" : ", discontinuous")};
}

Outcome desk_training() {
  const auto task = exercise(60);
  const auto& t = trained("exercise60", task, "reactive", 0);
  eval::Experiment ex;
  ex.name = "closed_loop";
  ex.task = task;
  ex.policy = t.policy;
  ex.control = t.control;
  ex.seeds = {100, 101, 102, 103, 104};
  const auto c = eval::summarize(ex, eval::run_experiment(ex));
  return {c.f1.mean >= kTrainedF1,
          "closed-loop F1 " + fmt(c.f1.mean) + " over 5 episodes, hold " + fmt(c.hold_ratio.mean)};
}

Outcome reactive_vs_fixed() {
  const auto task = exercise(60);
  const auto r = cell("reactive", "exercise60", task, "reactive", RolloutMode::kClosedLoop);
  const auto f = cell("fixed", "exercise60", task, "fixed", RolloutMode::kFixedGrasp);
  const bool ok = r.f1.mean > f.f1.mean && r.hold_ratio.mean > f.hold_ratio.mean &&
                  r.hold_ratio.mean - f.hold_ratio.mean >= kHoldGap;
  return {ok, "F1 " + fmt(r.f1.mean) + " vs " + fmt(f.f1.mean) + ", hold " + fmt(r.hold_ratio.mean) +
                  " vs " + fmt(f.hold_ratio.mean)};
}

Outcome curriculum_ablation() {
  bool ok = true;
  std::string detail;
  for (double bpm : {120.0, 180.0}) {
    const std::string key = "exercise" + std::to_string(static_cast<int>(bpm));
    const auto task = exercise(bpm);
    const auto on = cell("curriculum", key, task, "reactive", RolloutMode::kClosedLoop);
    const auto off = cell("no_curriculum", key, task, "no_curriculum", RolloutMode::kClosedLoop);
    const double ratio = off.trajectory_error.mean / on.trajectory_error.mean;
    ok = ok && ratio >= kCurriculumRatio;
    detail += (detail.empty() ? "" : "; ") + fmt(bpm, 3) + " BPM traj " +
              fmt(on.trajectory_error.mean) + " with, " + fmt(off.trajectory_error.mean) +
              " without (x" + fmt(ratio, 3) + ")";
  }
  return {ok, detail};
}

Outcome arm_vs_finger() {
  bool ok = true;
  std::string detail;
  for (double bpm : {60.0, 120.0, 180.0, 240.0}) {
    const std::string key = "exercise" + std::to_string(static_cast<int>(bpm));
    const auto task = exercise(bpm);
    const auto finger = cell("finger", key, task, "reactive", RolloutMode::kClosedLoop);
    const auto arm = cell("arm", key, task, "arm", RolloutMode::kArmDriven);
    ok = ok && finger.energy.mean < arm.energy.mean;
    if (bpm >= 180) ok = ok && finger.trajectory_error.mean <= arm.trajectory_error.mean;
    detail += (detail.empty() ? "" : "; ") + fmt(bpm, 3) + " BPM energy " + fmt(finger.energy.mean) +
              "/" + fmt(arm.energy.mean) + " traj " + fmt(finger.trajectory_error.mean, 3) + "/" +
              fmt(arm.trajectory_error.mean, 3);
  }
  return {ok, "finger/arm: " + detail};
}

Outcome residual_ladder() {
  const auto task = ccdd_loop();
  const auto res = cell("residual", "ccdd_loop", task, "reactive", RolloutMode::kClosedLoop);
  const auto plan = cell("plan_only", "ccdd_loop", task, "reactive", RolloutMode::kPlanOnly);
  const auto scratch = cell("scratch", "ccdd_loop", task, "scratch", RolloutMode::kClosedLoop);
  return {res.f1.mean > plan.f1.mean && plan.f1.mean > scratch.f1.mean,
          "F1 residual " + fmt(res.f1.mean) + " > plan-only " + fmt(plan.f1.mean) + " > scratch " +
              fmt(scratch.f1.mean)};
}

Outcome open_vs_closed() {
  const auto train_task = randomized_sequence("ccdd");
  bool ok = true;
  std::string detail;
  for (const std::string pattern : {"ccdd", "ccddccdd"}) {
    const auto task = randomized_sequence(pattern);
    std::vector<eval::MatrixRow> closed_rows, open_rows;
    for (auto seed : kSeeds) {
      const auto& t = trained("ccdd_randomized", train_task, "reactive", seed);
      eval::Experiment ex;
      ex.task = task;
      ex.policy = t.policy;
      ex.control = t.control;
      ex.record_seed = seed;
      ex.seeds = {seed * 10 + 1, seed * 10 + 2, seed * 10 + 3, seed * 10 + 4, seed * 10 + 5};
      ex.mode = RolloutMode::kClosedLoop;
      auto c = eval::run_experiment(ex);
      ex.mode = RolloutMode::kOpenLoopReplay;
      auto o = eval::run_experiment(ex);
      closed_rows.insert(closed_rows.end(), c.begin(), c.end());
      open_rows.insert(open_rows.end(), o.begin(), o.end());
    }
    eval::Experiment tag;
    const double closed = eval::summarize(tag, closed_rows).f1.mean;
    const double open = eval::summarize(tag, open_rows).f1.mean;
    ok = ok && (pattern == "ccdd" ? closed >= open : closed > open);
    detail += (detail.empty() ? "" : "; ") + pattern + " closed " + fmt(closed) + " vs open " + fmt(open);
  }
  return {ok, detail};
}

Outcome randomization() {
  world::WorldConfig cfg;
  cfg.randomize = true;
  double gmin = 2, gmax = 0, fmin = 1, fmax = -1;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto s = world::reset(cfg, seed);
    gmin = std::min(gmin, s.physics.gain_scale);
    gmax = std::max(gmax, s.physics.gain_scale);
    fmin = std::min(fmin, s.physics.friction_offset);
    fmax = std::max(fmax, s.physics.friction_offset);
  }
  const reward::ObservationLayout layout(1, 6, 10, 10);
  auto state = world::reset(cfg, 3);
  double sum = 0, sq = 0;
  long n = 0;
  while (n < kNoiseSamples) {
    std::vector<double> obs(layout.size(), 0.0);
    reward::apply_domain_randomization(cfg, layout, obs, state);
    for (const auto& b : layout.blocks()) {
      if (!b.noisy) continue;
      for (std::size_t i = 0; i < b.size && n < kNoiseSamples; ++i, ++n) {
        sum += obs[b.offset + i];
        sq += obs[b.offset + i] * obs[b.offset + i];
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  const bool ok = sd >= kNoiseStdLo && sd <= kNoiseStdHi && gmin >= 0.9 && gmax <= 1.1 &&
                  fmin >= -0.2 && fmax <= 0.2;
  return {ok, "noise std " + fmt(sd) + " over " + std::to_string(n) + " samples, gain [" + fmt(gmin) +
                  ", " + fmt(gmax) + "], friction [" + fmt(fmin) + ", " + fmt(fmax) + "]"};
}

Outcome curriculum_gate() {
  const auto task = exercise(60);
  const auto& t = trained("exercise60", task, "reactive", 0);
  learn::RolloutOptions before, after;
  before.global_step = kCurriculumSteps - 1;
  after.global_step = kCurriculumSteps;
  const auto a = learn::rollout(t.policy.get(), *task, t.control, before);
  const auto b = learn::rollout(t.policy.get(), *task, t.control, after);
  return {a.drum_contacts == 0 && b.drum_contacts > 0,
          "contacts " + std::to_string(a.drum_contacts) + " at step " +
              std::to_string(kCurriculumSteps - 1) + ", " + std::to_string(b.drum_contacts) +
              " at " + std::to_string(kCurriculumSteps)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"reward formulas and weights", formulas},
      {"gae, gradients, bandit", learner_numerics},
      {"planner contact over 6 genres", planner_contract},
      {"desk-scale training F1", desk_training},
      {"reactive vs fixed grasp", reactive_vs_fixed},
      {"contact curriculum ablation", curriculum_ablation},
      {"finger vs arm driven", arm_vs_finger},
      {"residual ladder", residual_ladder},
      {"closed vs open loop", open_vs_closed},
      {"randomization distributions", randomization},
      {"curriculum gate", curriculum_gate},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto tc = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  "
              << std::left << std::setw(32) << criteria[i].first << std::right << o.detail << "  ["
              << fmt(seconds_since(tc), 3) << " s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << " (" << g_cache.size() << " trainings, " << fmt(g_train_seconds, 4) << " s training, "
            << fmt(seconds_since(t0), 4) << " s total)" << std::endl;
  return failed;
}
