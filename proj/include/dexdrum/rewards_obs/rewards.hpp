#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/common/geometry.hpp"
#include "dexdrum/drumworld/world.hpp"
#include "dexdrum/score_io/score.hpp"

namespace dexdrum::reward {

using score::DrumId;
using score::ScheduledScore;

// Gaussian distance shaping onto [0, 1]: exp(-0.5 (d / sigma)^2).
inline double shaping_g(double d, double sigma) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorKind::kNonPositiveSigma, "shaping sigma must be positive");
  }
  const double z = d / sigma;
  return std::exp(-0.5 * z * z);
}

inline double fingertip_reward(int n_contacts, double epsilon = 1e-6) {
  return std::exp(-1.0 / (static_cast<double>(n_contacts) + epsilon));
}

// Thumb and index should pinch the fulcrum point.
inline double fulcrum_reward(const Vec3& thumb, const Vec3& index,
                             const Vec3& fulcrum, double sigma) {
  const double d = 0.5 * ((thumb - fulcrum).norm() + (index - fulcrum).norm());
  return shaping_g(d, sigma);
}

// Unweighted arm effort: |tau| + |v|.
inline double arm_penalty(const Vec3& tau, const Vec3& v) {
  return tau.norm() + v.norm();
}

// Stick tracking: gated on the grasp, shaped on the mean head/tail error.
inline double trajectory_reward(bool is_grasped, const Vec3& head, const Vec3& tail,
                                const Vec3& ref_head, const Vec3& ref_tail,
                                double sigma) {
  if (!is_grasped) return 0.0;
  const double err = 0.5 * ((head - ref_head).norm() + (tail - ref_tail).norm());
  return shaping_g(err, sigma);
}

struct RewardWeights {
  double fingertip = 1.0;
  double fulcrum = 1.0;
  double arm = 0.03;  // applied as a penalty
  double trajectory = 2.0;
  double hit = 1.0;
};

struct RewardConfig {
  RewardWeights weights;
  double sigma_fulcrum = 0.05;
  double sigma_trajectory = 0.05;
  double fingertip_epsilon = 1e-6;
  bool arm_penalty_enabled = true;
};

struct RewardBreakdown {
  double fingertip = 0.0;
  double fulcrum = 0.0;
  double arm_penalty = 0.0;
  double trajectory = 0.0;
  double drum_hit = 0.0;
  double weighted_total = 0.0;
};

inline double total_reward(const RewardBreakdown& p, const RewardWeights& w = {}) {
  return w.fingertip * p.fingertip + w.fulcrum * p.fulcrum - w.arm * p.arm_penalty +
         w.trajectory * p.trajectory + w.hit * p.drum_hit;
}

// Per-episode record of which scheduled hits have been played.
class HitTracker {
 public:
  HitTracker() = default;
  explicit HitTracker(const ScheduledScore& sched) : sched_(&sched) { reset(); }

  void reset() {
    consumed_.clear();
    for (const auto& h : sched_->hands) consumed_.emplace_back(h.size(), false);
    false_positives_ = 0;
  }

  const ScheduledScore& schedule() const { return *sched_; }

  // Greedy: each hit consumes the nearest unconsumed same-drum scheduled hit
  // of its hand within the window (earlier one on ties). At most one reward
  // per hand per step.
  int consume(const std::vector<world::HitEvent>& hits, int step) {
    const int window = sched_->window_halfwidth_steps;
    std::vector<bool> rewarded(consumed_.size(), false);
    int total = 0;
    for (const auto& hit : hits) {
      const auto h = static_cast<std::size_t>(hit.hand);
      if (h >= consumed_.size()) continue;
      const auto& list = sched_->hands[h];
      int best = -1;
      int best_dist = 0;
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (consumed_[h][i] || list[i].drum != hit.drum) continue;
        const int dist = std::abs(step - list[i].step);
        if (dist > window) continue;
        if (best < 0 || dist < best_dist) {
          best = static_cast<int>(i);
          best_dist = dist;
        }
      }
      if (best < 0 || rewarded[h]) {
        ++false_positives_;
        continue;
      }
      consumed_[h][static_cast<std::size_t>(best)] = true;
      rewarded[h] = true;
      ++total;
    }
    return total;
  }

  bool is_consumed(int hand, std::size_t i) const {
    return consumed_[static_cast<std::size_t>(hand)][i];
  }
  int false_positives() const { return false_positives_; }

  // Drum of the most recent hit that is played or whose window has passed.
  DrumId previous_drum(int step) const {
    int best_step = -1;
    DrumId d = DrumId::kNone;
    for (std::size_t h = 0; h < consumed_.size(); ++h) {
      const auto& list = sched_->hands[h];
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (!done(h, i, step)) continue;
        if (list[i].step > best_step) {
          best_step = list[i].step;
          d = list[i].drum;
        }
      }
    }
    return d;
  }

  // Earliest hit still open (not played, window not passed); -1 if none.
  int next_hit_step(int step, DrumId* drum = nullptr) const {
    int best = -1;
    DrumId d = DrumId::kNone;
    for (std::size_t h = 0; h < consumed_.size(); ++h) {
      const auto& list = sched_->hands[h];
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (done(h, i, step)) continue;
        if (best < 0 || list[i].step < best) {
          best = list[i].step;
          d = list[i].drum;
        }
      }
    }
    if (drum) *drum = d;
    return best;
  }

 private:
  bool done(std::size_t h, std::size_t i, int step) const {
    return consumed_[h][i] ||
           step > sched_->hands[h][i].step + sched_->window_halfwidth_steps;
  }

  const ScheduledScore* sched_ = nullptr;
  std::vector<std::vector<bool>> consumed_;
  int false_positives_ = 0;
};

inline double hit_reward(const std::vector<world::HitEvent>& hits, HitTracker& tracker,
                         int step) {
  return static_cast<double>(tracker.consume(hits, step));
}

}  // namespace dexdrum::reward
