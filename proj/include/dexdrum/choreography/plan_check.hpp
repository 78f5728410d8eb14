#pragma once

// Contract checks over a built reference: head on the pad at every hit step,
// constant stick length, bounded per-step motion.

#include <algorithm>
#include <cmath>

#include "dexdrum/choreography/planner.hpp"

namespace dexdrum::choreo {

struct PlannerReport {
  std::size_t n_hits = 0;
  double max_contact_error = 0.0;  // m, head height above the pad at hit steps
  double max_rigid_error = 0.0;    // m, | |head - tail| - length |
  double max_step = 0.0;           // m, largest head move between steps
  bool continuous = false;
};

inline PlannerReport check_plan(const score::ScheduledScore& sched, const DrumLayout& layout,
                                const PlannerConfig& cfg, const ReferenceTrajectory& ref) {
  PlannerReport r;
  for (std::size_t h = 0; h < sched.hands.size(); ++h) {
    const auto& hand = ref.hands[h];
    for (const auto& hit : sched.hands[h]) {
      if (hit.step < 0 || hit.step >= ref.n_steps()) continue;
      const auto& pad = layout.at(hit.drum);
      const double height =
          (hand.head[static_cast<std::size_t>(hit.step)] - pad.surface_point()).dot(pad.normal);
      r.max_contact_error = std::max(r.max_contact_error, std::abs(height));
      ++r.n_hits;
    }
    for (std::size_t k = 0; k < hand.head.size(); ++k) {
      r.max_rigid_error = std::max(
          r.max_rigid_error, std::abs((hand.head[k] - hand.tail[k]).norm() - cfg.stick.length));
    }
  }
  r.max_step = max_step_displacement(ref);
  r.continuous = is_continuous(ref, cfg.v_max);
  return r;
}

}  // namespace dexdrum::choreo
