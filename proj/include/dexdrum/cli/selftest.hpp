#pragma once

// `dexdrum selftest`: closed-form reward values, learner oracles, planner
// contact, randomization ranges and metric matching, one line per check.

#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/choreography/plan_check.hpp"
#include "dexdrum/evalkit/metrics.hpp"
#include "dexdrum/learner/oracles.hpp"
#include "dexdrum/rewards_obs/observation.hpp"
#include "dexdrum/rewards_obs/rewards.hpp"
#include "dexdrum/score_io/smf.hpp"

namespace dexdrum::cli {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

namespace selftest_detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline CheckResult reward_formulas() {
  using namespace reward;
  const double tol = 1e-9;
  double worst = 0.0;
  auto near = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  near(shaping_g(0.05, 0.05), std::exp(-0.5));
  near(shaping_g(0.15, 0.05), std::exp(-4.5));
  near(fingertip_reward(1), std::exp(-1.0 / (1.0 + 1e-6)));
  near(fingertip_reward(5), std::exp(-1.0 / (5.0 + 1e-6)));
  const Vec3 f(0.1, 0.2, 0.3);
  near(fulcrum_reward(f + Vec3(0.04, 0, 0), f + Vec3(0, 0.06, 0), f, 0.05), std::exp(-0.5));
  near(arm_penalty(Vec3(1, 2, 2), Vec3::Zero()), 3.0);
  near(arm_penalty(Vec3::Zero(), Vec3(0.3, 0.4, 0)), 0.5);
  const Vec3 h(0, 0, 0), t(0, -0.4, 0);
  near(trajectory_reward(true, h + Vec3(0.05, 0, 0), t, h, t, 0.05), std::exp(-0.125));
  near(trajectory_reward(false, h, t, h, t, 0.05), 0.0);
  RewardBreakdown p;
  p.trajectory = 1.0;
  p.arm_penalty = 3.0;
  near(total_reward(p), 2.0 - 0.09);
  const RewardWeights w;
  const bool weights = w.fingertip == 1.0 && w.fulcrum == 1.0 && w.arm == 0.03 &&
                       w.trajectory == 2.0 && w.hit == 1.0;
  return {"reward formulas", worst < tol && weights, "max abs err " + fmt(worst)};
}

inline CheckResult gae_oracle() {
  const auto g = learn::compute_gae({1, 1}, {0.5, 0.5}, {false, false}, 0.0, 0.8, 0.9);
  const double ex = std::max(std::abs(g.advantages[0] - 1.26), std::abs(g.advantages[1] - 0.5));
  const double err = learn::oracle::gae_max_error(2000, 6, 1);
  return {"gae vs n-step oracle", ex < 1e-12 && err < 1e-12, "max abs err " + fmt(std::max(ex, err))};
}

inline CheckResult gradient_oracle() {
  const double err = learn::oracle::ppo_gradient_max_error(100, 2);
  return {"ppo gradient vs finite differences", err < 1e-4, "max rel err " + fmt(err)};
}

inline CheckResult bandit() {
  int reached = 0;
  double worst = 1.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto r = learn::oracle::run_bandit(s);
    reached += r.reached;
    worst = std::min(worst, r.expected);
  }
  return {"ppo contextual bandit", reached == 5,
          std::to_string(reached) + "/5 seeds, lowest expected reward " + fmt(worst)};
}

inline CheckResult planner_contact() {
  const auto layout = choreo::full_kit_layout();
  choreo::PlannerConfig cfg;
  double worst = 0.0, rigid = 0.0;
  bool continuous = true;
  for (double bpm : {60.0, 120.0, 180.0, 240.0}) {
    const auto s = score::generate_exercise(bpm, 12, score::DrumId::kSnare);
    const auto map = choreo::assign_hands(s, layout, choreo::AssignmentRule::kStaticBySide, 1);
    const auto sched = score::schedule(s, 20.0, map, 1, 2);
    const auto ref = choreo::build_reference(sched, layout, cfg, 20 * 10);
    const auto r = choreo::check_plan(sched, layout, cfg, ref);
    worst = std::max(worst, r.max_contact_error);
    rigid = std::max(rigid, r.max_rigid_error);
    continuous = continuous && r.continuous;
  }
  return {"planner head on pad at hits", worst < 1e-9 && rigid < 1e-6 && continuous,
          "contact err " + fmt(worst) + " m, rigid err " + fmt(rigid) + " m"};
}

inline CheckResult randomization() {
  world::WorldConfig cfg;
  cfg.randomize = true;
  double gmin = 2, gmax = 0, fmin = 1, fmax = -1;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    const auto s = world::reset(cfg, seed);
    gmin = std::min(gmin, s.physics.gain_scale);
    gmax = std::max(gmax, s.physics.gain_scale);
    fmin = std::min(fmin, s.physics.friction_offset);
    fmax = std::max(fmax, s.physics.friction_offset);
  }
  reward::ObservationLayout layout(1, 6, 10, 10);
  auto state = world::reset(cfg, 1);
  double sum = 0, sq = 0;
  long n = 0;
  while (n < 100000) {
    std::vector<double> obs(layout.size(), 0.0);
    reward::apply_domain_randomization(cfg, layout, obs, state);
    for (const auto& b : layout.blocks()) {
      if (!b.noisy) continue;
      for (std::size_t i = 0; i < b.size; ++i) {
        sum += obs[b.offset + i];
        sq += obs[b.offset + i] * obs[b.offset + i];
        ++n;
      }
    }
  }
  const double m = sum / n;
  const double sd = std::sqrt(sq / n - m * m);
  const bool ok = gmin >= 0.9 && gmax <= 1.1 && fmin >= -0.2 && fmax <= 0.2 && sd >= 0.049 &&
                  sd <= 0.051;
  return {"randomization ranges", ok,
          "noise std " + fmt(sd) + ", gain [" + fmt(gmin) + ", " + fmt(gmax) + "], friction [" +
              fmt(fmin) + ", " + fmt(fmax) + "]"};
}

inline CheckResult f1_example() {
  score::ScheduledScore s;
  s.hands = {{{20, score::DrumId::kSnare}, {40, score::DrumId::kSnare}}};
  const auto r = eval::f1_score({{21, 0, score::DrumId::kSnare}}, s, 2);
  const bool chain = eval::f1_score({{2, 0, score::DrumId::kSnare}, {5, 0, score::DrumId::kSnare}},
                                    score::ScheduledScore{{{{0, score::DrumId::kSnare},
                                                            {3, score::DrumId::kSnare}}}},
                                    2)
                         .true_pos == 2;
  return {"f1 matching", r.precision == 1.0 && r.recall == 0.5 &&
                             std::abs(r.f1 - 2.0 / 3.0) < 1e-15 && chain,
          "f1 " + fmt(r.f1)};
}

inline CheckResult smf_example() {
  // One track, division 480, snare at one beat.
  const std::vector<std::uint8_t> bytes = {
      'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
      'M', 'T', 'r', 'k', 0, 0, 0, 9, 0x83, 0x60, 0x99, 38, 100, 0x00, 0xFF, 0x2F, 0x00};
  const auto s = score::parse_smf(bytes);
  const bool ok = s.events.size() == 1 && s.events[0].time_s == 0.5 &&
                  s.events[0].drum == score::DrumId::kSnare;
  return {"smf snare at one beat", ok, ok ? "0.5 s" : "wrong parse"};
}

}  // namespace selftest_detail

// Runs every check, writes one line each, returns the number of failures.
inline int run_selftest(std::ostream& out) {
  using namespace selftest_detail;
  const std::vector<std::function<CheckResult()>> checks = {
      reward_formulas, gae_oracle, gradient_oracle, bandit,
      planner_contact, randomization, f1_example, smf_example};
  int failed = 0;
  for (const auto& c : checks) {
    CheckResult r;
    try {
      r = c();
    } catch (const std::exception& e) {
      r = {"(exception)", false, e.what()};
    }
    failed += !r.ok;
    out << (r.ok ? "PASS  " : "FAIL  ") << std::left << std::setw(36) << r.name << r.detail << "\n";
  }
  out << (failed == 0 ? "selftest passed" : "selftest FAILED: " + std::to_string(failed) + " checks")
      << "\n";
  return failed;
}

}  // namespace dexdrum::cli
