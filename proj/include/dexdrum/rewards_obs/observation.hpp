#pragma once

// Flat observation vector. Block order:
//   arm proprio (hand-major, d_arm each), hand proprio (d_hand each),
//   stick head (3 each), stick tail (3 each),
//   plan head (hand-major, L x 3 each), plan tail (L x 3 each),
//   stick grasped (1 each), previous drum one-hot (7), next drum one-hot (7),
//   time before next hit (1).

#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dexdrum/choreography/planner.hpp"
#include "dexdrum/drumworld/world.hpp"
#include "dexdrum/rewards_obs/rewards.hpp"

namespace dexdrum::reward {

struct ObsBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool noisy = false;  // receives proprioceptive noise under randomization
};

class ObservationLayout {
 public:
  ObservationLayout(int n_hands, int d_arm, int d_hand, int lookahead)
      : n_hands_(n_hands), d_arm_(d_arm), d_hand_(d_hand), lookahead_(lookahead) {
    if (n_hands < 1 || d_arm < 6 || d_hand < 10 || lookahead < 1) {
      throw Error(ErrorKind::kBadConfig,
                  "observation needs n_hands>=1, d_arm>=6, d_hand>=10, L>=1");
    }
    const auto nh = static_cast<std::size_t>(n_hands);
    const auto L = static_cast<std::size_t>(lookahead);
    add("arm_proprio", nh * static_cast<std::size_t>(d_arm), true);
    add("hand_proprio", nh * static_cast<std::size_t>(d_hand), true);
    add("stick_head", nh * 3, true);
    add("stick_tail", nh * 3, true);
    add("plan_head", nh * L * 3, false);
    add("plan_tail", nh * L * 3, false);
    add("stick_grasped", nh, false);
    add("prev_drum", score::kNumDrumIds, false);
    add("next_drum", score::kNumDrumIds, false);
    add("time_to_next_hit", 1, false);
  }

  std::size_t size() const { return size_; }
  int n_hands() const { return n_hands_; }
  int d_arm() const { return d_arm_; }
  int d_hand() const { return d_hand_; }
  int lookahead() const { return lookahead_; }
  const std::vector<ObsBlock>& blocks() const { return blocks_; }

  const ObsBlock& block(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return b;
    }
    throw Error(ErrorKind::kBadConfig, "no observation block " + name);
  }

 private:
  void add(const std::string& name, std::size_t n, bool noisy) {
    blocks_.push_back({name, size_, n, noisy});
    size_ += n;
  }

  int n_hands_, d_arm_, d_hand_, lookahead_;
  std::vector<ObsBlock> blocks_;
  std::size_t size_ = 0;
};

struct ObservationConfig {
  int d_arm = 6;
  int d_hand = 10;
  int lookahead = 10;
  double time_horizon_s = 2.0;  // clamp for "time before next hit"
};

inline std::vector<double> build_observation(const ObservationLayout& layout,
                                             const world::WorldState& state,
                                             const choreo::ReferenceTrajectory& ref,
                                             const HitTracker& tracker, int step,
                                             double time_horizon_s) {
  std::vector<double> obs(layout.size(), 0.0);
  const auto nh = static_cast<std::size_t>(layout.n_hands());
  const auto L = static_cast<std::size_t>(layout.lookahead());
  auto put3 = [&](std::size_t at, const Vec3& v) {
    obs[at] = v.x();
    obs[at + 1] = v.y();
    obs[at + 2] = v.z();
  };

  const auto& arm = layout.block("arm_proprio");
  const auto& hnd = layout.block("hand_proprio");
  const auto& sh = layout.block("stick_head");
  const auto& st = layout.block("stick_tail");
  const auto& ph = layout.block("plan_head");
  const auto& pt = layout.block("plan_tail");
  const auto& gr = layout.block("stick_grasped");
  const int n_ref = ref.n_steps();

  for (std::size_t h = 0; h < nh; ++h) {
    const auto& slot = state.hands[h];
    const std::size_t a0 = arm.offset + h * static_cast<std::size_t>(layout.d_arm());
    put3(a0, slot.hand.wrist_pos);
    put3(a0 + 3, slot.hand.wrist_vel);
    const std::size_t h0 = hnd.offset + h * static_cast<std::size_t>(layout.d_hand());
    for (int f = 0; f < world::kFingers; ++f) {
      obs[h0 + static_cast<std::size_t>(f)] = slot.hand.closure[f];
      obs[h0 + 5 + static_cast<std::size_t>(f)] = slot.hand.closure_vel[f];
    }
    put3(sh.offset + 3 * h, slot.stick.head_pos);
    put3(st.offset + 3 * h, slot.stick.tail_pos);
    for (std::size_t j = 0; j < L; ++j) {
      // Pad past the end by repeating the final reference point.
      const int k = std::min(step + 1 + static_cast<int>(j), n_ref - 1);
      const auto ku = static_cast<std::size_t>(std::max(k, 0));
      put3(ph.offset + (h * L + j) * 3, ref.hands[h].head[ku]);
      put3(pt.offset + (h * L + j) * 3, ref.hands[h].tail[ku]);
    }
    obs[gr.offset + h] = slot.hand.stick_held ? 1.0 : 0.0;
  }

  const DrumId prev = tracker.previous_drum(step);
  DrumId next_drum = DrumId::kNone;
  const int next = tracker.next_hit_step(step, &next_drum);
  obs[layout.block("prev_drum").offset + score::index_of(prev)] = 1.0;
  obs[layout.block("next_drum").offset + score::index_of(next_drum)] = 1.0;
  double ttn = time_horizon_s;
  if (next >= 0) {
    ttn = std::clamp((next - step) / tracker.schedule().control_rate_hz, 0.0,
                     time_horizon_s);
  }
  obs[layout.block("time_to_next_hit").offset] = ttn;
  return obs;
}

// Adds N(0, std^2) to the proprioceptive and stick-position entries only.
template <typename Rng>
void apply_observation_noise(const ObservationLayout& layout, std::span<double> obs,
                             double std_dev, Rng& rng) {
  std::normal_distribution<double> noise(0.0, std_dev);
  for (const auto& b : layout.blocks()) {
    if (!b.noisy) continue;
    for (std::size_t i = 0; i < b.size; ++i) obs[b.offset + i] += noise(rng);
  }
}

// Observation-side randomization: a no-op unless the world randomizes.
inline void apply_domain_randomization(const world::WorldConfig& cfg,
                                       const ObservationLayout& layout,
                                       std::span<double> obs, world::WorldState& state) {
  if (!cfg.randomize) return;
  apply_observation_noise(layout, obs, cfg.obs_noise_std, state.rng);
}

}  // namespace dexdrum::reward
