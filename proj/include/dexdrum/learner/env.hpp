#pragma once

// Episode wrapper around the world: builds the nominal action from the plan,
// composes the policy residual on top, scores each step and records a trace.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dexdrum/choreography/planner.hpp"
#include "dexdrum/common/error.hpp"
#include "dexdrum/drumworld/world.hpp"
#include "dexdrum/evalkit/trace.hpp"
#include "dexdrum/rewards_obs/observation.hpp"
#include "dexdrum/rewards_obs/rewards.hpp"
#include "dexdrum/score_io/score.hpp"

namespace dexdrum::learn {

inline constexpr int kActionsPerHand = 3 + world::kFingers;

enum class RolloutMode { kClosedLoop, kOpenLoopReplay, kPlanOnly, kFixedGrasp, kArmDriven };

inline std::string_view mode_name(RolloutMode m) {
  switch (m) {
    case RolloutMode::kClosedLoop: return "closed_loop";
    case RolloutMode::kOpenLoopReplay: return "open_loop_replay";
    case RolloutMode::kPlanOnly: return "plan_only";
    case RolloutMode::kFixedGrasp: return "fixed_grasp";
    case RolloutMode::kArmDriven: return "arm_driven";
  }
  return "?";
}

inline std::optional<RolloutMode> mode_from_name(std::string_view s) {
  for (auto m : {RolloutMode::kClosedLoop, RolloutMode::kOpenLoopReplay, RolloutMode::kPlanOnly,
                 RolloutMode::kFixedGrasp, RolloutMode::kArmDriven}) {
    if (mode_name(m) == s) return m;
  }
  return std::nullopt;
}

enum class PlanSource {
  kPlanned,  // nominal action follows the choreography
  kNone,     // no nominal plan: the policy outputs the whole action
};

struct ControlConfig {
  choreo::StrokeStyle style = choreo::StrokeStyle::kFinger;
  PlanSource plan = PlanSource::kPlanned;
  bool freeze_closures = false;
  bool residual_wrist = true;
  bool residual_closure = true;
  double residual_scale = 0.1;  // fraction of each action bound
  bool arm_penalty = true;
  bool curriculum = true;

  void validate() const {
    if (!(residual_scale >= 0.0)) {
      throw Error(ErrorKind::kBadConfig, "residual_scale must be >= 0");
    }
  }
};

// Control settings a rollout mode implies on top of the trained ones.
inline ControlConfig control_for(RolloutMode mode, ControlConfig c) {
  switch (mode) {
    case RolloutMode::kPlanOnly:
      c.residual_scale = 0.0;
      break;
    case RolloutMode::kFixedGrasp:
      // Frozen fingers cannot swing the stick, so the arm carries the stroke.
      c.style = choreo::StrokeStyle::kArm;
      c.freeze_closures = true;
      c.residual_closure = false;
      break;
    case RolloutMode::kArmDriven:
      c.style = choreo::StrokeStyle::kArm;
      c.arm_penalty = false;
      c.curriculum = false;
      break;
    default:
      break;
  }
  return c;
}

struct TaskConfig {
  world::WorldConfig world;
  choreo::PlannerConfig planner;
  reward::RewardConfig reward;
  reward::ObservationConfig obs;
  double grasp_closure = 0.75;  // thumb/index pinch of the nominal plan
  int episode_steps = 400;
  int hit_window_steps = 2;
};

struct Task {
  TaskConfig cfg;
  score::DrumScore score;
  score::ScheduledScore sched;
  choreo::ReferenceTrajectory ref;  // episode_steps + 1 samples
  reward::ObservationLayout layout;

  int n_steps() const { return cfg.episode_steps; }
  int n_hands() const { return cfg.world.n_hands(); }
};

inline Task make_task(TaskConfig cfg, const score::DrumScore& input) {
  if (cfg.episode_steps < 1) throw Error(ErrorKind::kBadConfig, "episode_steps must be >= 1");
  cfg.world.validate();
  const int n_hands = cfg.world.n_hands();
  cfg.planner.stick.length = cfg.world.stick_length;
  cfg.planner.stick.grasp_fraction = cfg.world.grasp_fraction;
  cfg.planner.hands.resize(static_cast<std::size_t>(n_hands));
  for (int h = 0; h < n_hands; ++h) {
    cfg.planner.hands[static_cast<std::size_t>(h)].yaw = cfg.world.hands[static_cast<std::size_t>(h)].yaw;
  }
  auto playable = score::playable_only(input);
  // Hits whose window would run past the episode cannot be scored.
  std::erase_if(playable.events, [&](const score::DrumEvent& e) {
    return std::lround(e.time_s * cfg.world.policy_hz) + cfg.hit_window_steps > cfg.episode_steps;
  });
  const auto map = choreo::assign_hands(playable, cfg.world.layout,
                                        choreo::AssignmentRule::kStaticBySide, n_hands);
  auto sched = score::schedule(playable, cfg.world.policy_hz, map, n_hands, cfg.hit_window_steps);
  auto ref = choreo::build_reference(sched, cfg.world.layout, cfg.planner, cfg.episode_steps + 1);
  reward::ObservationLayout layout(n_hands, cfg.obs.d_arm, cfg.obs.d_hand, cfg.obs.lookahead);
  return Task{std::move(cfg), std::move(playable), std::move(sched), std::move(ref),
              std::move(layout)};
}

struct ResidualScale {
  double wrist = 0.0;    // m
  double closure = 0.0;  // closure units
};

// applied = nominal + scale * tanh(residual), clipped to the world's bounds.
// Residual layout per hand: wrist dx dy dz, then five closures.
inline world::Action compose_residual(const world::Action& nominal, std::span<const double> residual,
                                      const ResidualScale& scale, double action_clip) {
  if (residual.size() != nominal.hands.size() * kActionsPerHand) {
    throw Error(ErrorKind::kDimensionMismatch, "residual size does not match the action");
  }
  world::Action out = nominal;
  for (std::size_t h = 0; h < nominal.hands.size(); ++h) {
    const double* r = residual.data() + h * kActionsPerHand;
    auto& a = out.hands[h];
    for (int i = 0; i < 3; ++i) {
      a.wrist_delta[i] = std::clamp(a.wrist_delta[i] + scale.wrist * std::tanh(r[i]),
                                    -action_clip, action_clip);
    }
    for (int f = 0; f < world::kFingers; ++f) {
      a.closure_targets[f] =
          std::clamp(a.closure_targets[f] + scale.closure * std::tanh(r[3 + f]), 0.0, 1.0);
    }
  }
  return out;
}

struct EnvStep {
  std::vector<double> obs;
  double reward = 0.0;
  reward::RewardBreakdown parts;
  bool done = false;
  std::vector<world::HitEvent> hits;
  world::Action applied;
  int drum_contacts = 0;
};

class DrumEnv {
 public:
  DrumEnv(const Task& task, const ControlConfig& ctl) : task_(&task), ctl_(ctl), wcfg_(task.cfg.world) {
    ctl_.validate();
    const auto& pc = task.cfg.planner;
    plan_ = choreo::stick_to_wrist(task.ref, wcfg_.grasp_fraction, wcfg_.stick_length,
                                   task.cfg.grasp_closure, ctl_.style,
                                   pc.primitive.approach_pitch, pc.hands);
    // Start each episode on the plan's first sample.
    for (std::size_t h = 0; h < wcfg_.hands.size(); ++h) {
      wcfg_.hands[h].wrist = plan_.hands[h].wrist_target[0];
      wcfg_.hands[h].pitch = plan_.hands[h].pitch_target[0];
    }
    wcfg_.curriculum_active = ctl_.curriculum;
    rcfg_ = task.cfg.reward;
    if (!ctl_.arm_penalty) {
      rcfg_.arm_penalty_enabled = false;
      rcfg_.weights.arm = 0.0;
    }
    if (ctl_.plan == PlanSource::kNone) {
      scale_ = {ctl_.residual_wrist ? wcfg_.action_clip : 0.0, ctl_.residual_closure ? 0.5 : 0.0};
    } else {
      scale_ = {ctl_.residual_wrist ? ctl_.residual_scale * wcfg_.action_clip : 0.0,
                ctl_.residual_closure ? ctl_.residual_scale * 1.0 : 0.0};
    }
    tracker_ = reward::HitTracker(task.sched);
  }

  int obs_dim() const { return static_cast<int>(task_->layout.size()); }
  int act_dim() const { return task_->n_hands() * kActionsPerHand; }
  int n_steps() const { return task_->n_steps(); }
  int step_index() const { return k_; }
  bool done() const { return k_ >= task_->n_steps(); }
  const Task& task() const { return *task_; }
  const ControlConfig& control() const { return ctl_; }
  const world::WorldConfig& world_config() const { return wcfg_; }
  const world::WorldState& state() const { return state_; }
  const choreo::NominalPlan& plan() const { return plan_; }
  const ResidualScale& residual_scale() const { return scale_; }
  const reward::HitTracker& tracker() const { return tracker_; }
  const eval::EpisodeTrace& trace() const { return trace_; }
  double episode_return() const { return return_; }

  std::vector<double> reset(std::uint64_t seed, long global_step) {
    state_ = world::reset(wcfg_, seed);
    set_global_step(global_step);
    k_ = 0;
    return_ = 0.0;
    tracker_.reset();
    frozen_.clear();
    for (const auto& slot : state_.hands) frozen_.push_back(slot.hand.closure);
    trace_ = {};
    trace_.n_hands = task_->n_hands();
    record();
    return observe();
  }

  // Per-env vectorized step count; drives the contact curriculum.
  void set_global_step(long g) {
    if (wcfg_.curriculum_active) {
      world::set_contact_curriculum(state_, g, wcfg_.curriculum_steps);
    } else {
      state_.global_step = g;
      state_.curriculum_contact_enabled = true;
    }
  }

  world::Action nominal_action() const {
    world::Action a;
    a.hands.resize(state_.hands.size());
    const auto next = static_cast<std::size_t>(std::min(k_ + 1, task_->ref.n_steps() - 1));
    for (std::size_t h = 0; h < state_.hands.size(); ++h) {
      auto& ha = a.hands[h];
      if (ctl_.plan == PlanSource::kNone) {
        ha.wrist_delta.setZero();
        ha.closure_targets.fill(0.5);
      } else {
        const auto& n = plan_.hands[h];
        ha.wrist_delta = n.wrist_target[next] - state_.hands[h].hand.wrist_pos;
        for (int i = 0; i < 3; ++i) {
          ha.wrist_delta[i] = std::clamp(ha.wrist_delta[i], -wcfg_.action_clip, wcfg_.action_clip);
        }
        const double c = world::closure_for_pitch(wcfg_, n.pitch_target[next]);
        ha.closure_targets = {task_->cfg.grasp_closure, task_->cfg.grasp_closure, c, c, c};
      }
      if (ctl_.freeze_closures) ha.closure_targets = frozen_[h];
    }
    return a;
  }

  world::Action compose(std::span<const double> residual) const {
    return compose_residual(nominal_action(), residual, scale_, wcfg_.action_clip);
  }

  EnvStep step(std::span<const double> residual) { return step_applied(compose(residual)); }

  EnvStep step_applied(const world::Action& applied) {
    EnvStep out;
    out.applied = applied;
    const auto events = world::step(wcfg_, state_, applied);
    out.hits = world::detect_hits(events, wcfg_.hit_speed_threshold);
    out.drum_contacts = static_cast<int>(events.drum_contacts.size());
    ++k_;

    const auto& ref = task_->ref;
    const auto rk = static_cast<std::size_t>(std::min(k_, ref.n_steps() - 1));
    auto& p = out.parts;
    for (std::size_t h = 0; h < state_.hands.size(); ++h) {
      const auto& slot = state_.hands[h];
      p.fingertip += reward::fingertip_reward(events.fingertip_contacts[h], rcfg_.fingertip_epsilon);
      const auto tips = world::fingertip_positions(wcfg_, slot.hand, slot.stick, slot.yaw);
      p.fulcrum += reward::fulcrum_reward(tips[0], tips[1], world::fulcrum_point(wcfg_, slot.stick),
                                          rcfg_.sigma_fulcrum);
      p.arm_penalty += reward::arm_penalty(slot.arm_force, slot.hand.wrist_vel);
      p.trajectory += reward::trajectory_reward(slot.hand.stick_held, slot.stick.head_pos,
                                                slot.stick.tail_pos, ref.hands[h].head[rk],
                                                ref.hands[h].tail[rk], rcfg_.sigma_trajectory);
    }
    p.drum_hit = reward::hit_reward(out.hits, tracker_, k_);
    p.weighted_total = reward::total_reward(p, rcfg_.weights);
    out.reward = p.weighted_total;
    return_ += out.reward;

    for (const auto& hit : out.hits) trace_.hits.push_back({k_, hit.hand, hit.drum});
    trace_.drum_contacts += out.drum_contacts;
    record();
    out.done = done();
    out.obs = observe();
    return out;
  }

  std::vector<double> observe() {
    auto obs = reward::build_observation(task_->layout, state_, task_->ref, tracker_, k_,
                                         task_->cfg.obs.time_horizon_s);
    reward::apply_domain_randomization(wcfg_, task_->layout, obs, state_);
    return obs;
  }

 private:
  void record() {
    std::vector<eval::HandSample> row;
    for (const auto& slot : state_.hands) {
      eval::HandSample s;
      s.held = slot.hand.stick_held;
      s.head = slot.stick.head_pos;
      s.tail = slot.stick.tail_pos;
      s.wrist = slot.hand.wrist_pos;
      s.pitch = slot.stick.pitch;
      s.grip = slot.hand.grip;
      s.tau_norm = slot.arm_force.norm();
      s.v_norm = slot.hand.wrist_vel.norm();
      s.closure = slot.hand.closure;
      row.push_back(s);
    }
    trace_.steps.push_back(std::move(row));
  }

  const Task* task_;
  ControlConfig ctl_;
  world::WorldConfig wcfg_;
  reward::RewardConfig rcfg_;
  choreo::NominalPlan plan_;
  ResidualScale scale_;
  reward::HitTracker tracker_;
  world::WorldState state_;
  std::vector<world::Closure> frozen_;
  eval::EpisodeTrace trace_;
  int k_ = 0;
  double return_ = 0.0;
};

// Mixes a base seed with two indices (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr long kAfterCurriculum = std::numeric_limits<long>::max() / 2;

}  // namespace dexdrum::learn
