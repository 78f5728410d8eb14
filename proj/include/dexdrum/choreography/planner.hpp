#pragma once

// Turns a scheduled score into stick reference trajectories and the nominal
// wrist / pitch / closure plan the low-level controller tracks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/choreography/layout.hpp"
#include "dexdrum/common/error.hpp"
#include "dexdrum/common/geometry.hpp"
#include "dexdrum/score_io/score.hpp"

namespace dexdrum::choreo {

using score::DrumScore;
using score::HandMap;
using score::ScheduledHit;
using score::ScheduledScore;

// ---------------------------------------------------------------------------
// Hand assignment

enum class AssignmentRule { kStaticBySide, kExplicitMap };

// StaticBySide: drums left of the body midline (x < 0) go to hand 0 (left),
// the rest to hand 1. With a single hand everything goes to hand 0.
inline HandMap assign_hands(const DrumScore& score, const DrumLayout& layout,
                            AssignmentRule rule, int n_hands,
                            const HandMap& explicit_map = {}) {
  HandMap out{};
  for (const auto& e : score.events) {
    const auto i = score::index_of(e.drum);
    if (out[i]) continue;
    if (rule == AssignmentRule::kExplicitMap) {
      if (!explicit_map[i]) {
        throw Error(ErrorKind::kUnreachableDrum,
                    std::string(score::name_of(e.drum)) +
                        " is scored but has no hand in the explicit map");
      }
      out[i] = explicit_map[i];
      continue;
    }
    const auto& pad = layout.at(e.drum);
    out[i] = (n_hands == 1 || pad.center.x() < 0.0) ? 0 : 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

struct PrimitiveParams {
  double apex_height = 0.06;        // m above the drumhead
  double strike_halfwidth_s = 0.2;  // s either side of the hit
  double approach_pitch = 0.0;      // rad, stick pitch at the apex
  double rest_hover = 0.02;         // m above apex in the rest pose
  double transition_hover = 0.03;   // m bump when moving between drums
  double lead_in_s = 0.5;           // time to move from rest to first strike
  double transition_speed = 1.5;    // m/s, sizes drum-to-drum transitions

  void validate() const {
    if (!(apex_height > 0.0) || !(strike_halfwidth_s > 0.0) ||
        rest_hover < 0.0 || transition_hover < 0.0 || !(transition_speed > 0.0)) {
      throw Error(ErrorKind::kBadConfig, "invalid primitive parameters");
    }
  }
};

// Height above the drumhead of a raised-cosine strike: zero at the hit,
// apex_height at +-halfwidth.
inline double strike_height(double dt_from_hit, double halfwidth,
                            double apex_height) {
  return apex_height *
         (1.0 - std::cos(std::numbers::pi * dt_from_hit / halfwidth)) / 2.0;
}

// Head positions over [hit_step - w, hit_step + w] where w is the strike
// half-width in whole steps. Element j corresponds to step hit_step - w + j.
inline std::vector<Vec3> strike_primitive(int hit_step, const DrumPad& pad,
                                          const PrimitiveParams& params,
                                          double control_rate_hz,
                                          int* first_step = nullptr) {
  const double w_steps = params.strike_halfwidth_s * control_rate_hz;
  if (w_steps < 2.0 - 1e-12) {
    throw Error(ErrorKind::kWindowTooNarrow,
                "strike half-width must span at least 2 control periods");
  }
  const int w = static_cast<int>(std::floor(w_steps + 1e-12));
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(2 * w + 1));
  for (int k = -w; k <= w; ++k) {
    out.push_back(pad.surface_point() +
                  pad.normal * strike_height(k, w_steps, params.apex_height));
  }
  if (first_step) *first_step = hit_step - w;
  return out;
}

// Cubic ease-in-out from `from` to `to` in n_steps samples (the first sample
// is one step after `from`, the last equals `to`), lifted by a half-sine bump
// of `hover` along +z.
inline std::vector<Vec3> transition_primitive(const Vec3& from, const Vec3& to,
                                              int n_steps, double hover) {
  if (n_steps < 1) {
    throw Error(ErrorKind::kBadConfig, "transition needs at least one step");
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  for (int j = 1; j <= n_steps; ++j) {
    const double s = static_cast<double>(j) / n_steps;
    const double ease = s * s * (3.0 - 2.0 * s);
    Vec3 p = from + ease * (to - from);
    p.z() += hover * std::sin(std::numbers::pi * s);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference trajectory

struct StickGeometry {
  double length = 0.40;
  // Fulcrum position measured from the head: wrist = head + f * (tail - head).
  // 2/3 from the head is 1/3 from the butt end.
  double grasp_fraction = 2.0 / 3.0;

  double head_arm() const { return grasp_fraction * length; }
};

struct HandPlanSetup {
  double yaw = std::numbers::pi / 2.0;  // sticks point forward (+y)
  DrumId home_drum = DrumId::kSnare;
};

struct PlannerConfig {
  PrimitiveParams primitive;
  StickGeometry stick;
  std::vector<HandPlanSetup> hands{HandPlanSetup{}};
  double v_max = 3.0;  // m/s, continuity bound on the head
};

struct HandReference {
  std::vector<Vec3> head;
  std::vector<Vec3> tail;
  std::vector<double> pitch;
  std::vector<double> height_above_surface;
};

struct ReferenceTrajectory {
  std::vector<HandReference> hands;
  int resolved_overlaps = 0;  // strike windows shrunk to fit
  double control_rate_hz = 20.0;

  int n_steps() const {
    return hands.empty() ? 0 : static_cast<int>(hands.front().head.size());
  }
};

namespace detail {

struct Window {
  int hit_step;
  DrumId drum;
  double half;  // steps
};

inline Vec3 apex_point(const DrumPad& pad, double apex) {
  return pad.surface_point() + pad.normal * apex;
}

}  // namespace detail

// Builds per-hand head/tail trajectories of n_steps samples.
inline ReferenceTrajectory build_reference(const ScheduledScore& sched,
                                           const DrumLayout& layout,
                                           const PlannerConfig& cfg,
                                           int n_steps) {
  cfg.primitive.validate();
  if (static_cast<int>(cfg.hands.size()) != sched.n_hands()) {
    throw Error(ErrorKind::kBadConfig, "planner hand count does not match schedule");
  }
  const auto& prm = cfg.primitive;
  const double rate = sched.control_rate_hz;
  const double w_default = prm.strike_halfwidth_s * rate;
  if (w_default < 2.0 - 1e-12) {
    throw Error(ErrorKind::kWindowTooNarrow,
                "strike half-width must span at least 2 control periods");
  }
  const double head_arm = cfg.stick.head_arm();
  const double sin_approach = std::sin(prm.approach_pitch);

  ReferenceTrajectory ref;
  ref.control_rate_hz = rate;
  ref.hands.resize(cfg.hands.size());

  for (std::size_t h = 0; h < cfg.hands.size(); ++h) {
    const auto& hits = sched.hands[h];
    const auto& setup = cfg.hands[h];

    std::vector<detail::Window> win;
    win.reserve(hits.size());
    for (const auto& hit : hits) {
      layout.at(hit.drum);  // throws if missing
      win.push_back({hit.step, hit.drum, w_default});
    }
    // Overlapping windows shrink symmetrically so that they meet, leaving
    // room for a drum-to-drum transition when the drums differ.
    for (std::size_t i = 0; i + 1 < win.size(); ++i) {
      const double gap = win[i + 1].hit_step - win[i].hit_step;
      double travel = 0.0;
      if (win[i].drum != win[i + 1].drum) {
        const double dist = (layout.at(win[i].drum).surface_point() -
                             layout.at(win[i + 1].drum).surface_point()).norm();
        travel = std::max(1.0, std::ceil(dist / prm.transition_speed * rate));
      }
      if (win[i].half + win[i + 1].half + travel > gap + 1e-12) {
        const double half = (gap - travel) / 2.0;
        win[i].half = std::min(win[i].half, half);
        win[i + 1].half = std::min(win[i + 1].half, half);
        ++ref.resolved_overlaps;
      }
    }
    for (const auto& w : win) {
      if (w.half < 2.0 - 1e-12) {
        throw Error(ErrorKind::kWindowTooNarrow,
                    "hits at step " + std::to_string(w.hit_step) +
                        " are too dense for a 2-step strike window");
      }
    }

    const DrumPad& home = layout.has(setup.home_drum)
                              ? layout.at(setup.home_drum)
                              : layout.at(hits.empty() ? DrumId::kSnare : hits[0].drum);
    const Vec3 rest = detail::apex_point(home, prm.apex_height + prm.rest_hover);
    const double rest_height = prm.apex_height + prm.rest_hover;

    auto& out = ref.hands[h];
    out.head.resize(static_cast<std::size_t>(n_steps));
    out.height_above_surface.resize(static_cast<std::size_t>(n_steps));

    std::size_t next = 0;  // first window whose end is >= k
    for (int k = 0; k < n_steps; ++k) {
      while (next < win.size() && win[next].hit_step + win[next].half < k) ++next;
      Vec3 head;
      double height;
      if (win.empty()) {
        head = rest;
        height = rest_height;
      } else if (next < win.size() && k >= win[next].hit_step - win[next].half) {
        const auto& w = win[next];
        const auto& pad = layout.at(w.drum);
        height = strike_height(k - w.hit_step, w.half, prm.apex_height);
        head = pad.surface_point() + pad.normal * height;
      } else if (next == 0) {
        // Before the first window: rest, then ease into the first strike.
        const double start = win[0].hit_step - win[0].half;
        const double lead = prm.lead_in_s * rate;
        const double t0 = std::max(0.0, start - lead);
        const Vec3 to = detail::apex_point(layout.at(win[0].drum), prm.apex_height);
        if (k <= t0 || start <= t0) {
          head = rest;
          height = rest_height;
        } else {
          const double s = (k - t0) / (start - t0);
          const double ease = s * s * (3.0 - 2.0 * s);
          head = rest + ease * (to - rest);
          height = rest_height + ease * (prm.apex_height - rest_height);
        }
      } else if (next == win.size()) {
        head = detail::apex_point(layout.at(win.back().drum), prm.apex_height);
        height = prm.apex_height;
      } else {
        const auto& a = win[next - 1];
        const auto& b = win[next];
        const Vec3 from = detail::apex_point(layout.at(a.drum), prm.apex_height);
        const Vec3 to = detail::apex_point(layout.at(b.drum), prm.apex_height);
        const double t_start = a.hit_step + a.half;
        const double t_end = b.hit_step - b.half;
        const double s = std::clamp((k - t_start) / (t_end - t_start), 0.0, 1.0);
        const double ease = s * s * (3.0 - 2.0 * s);
        const double hover =
            a.drum == b.drum ? 0.0 : prm.transition_hover * std::sin(std::numbers::pi * s);
        head = from + ease * (to - from);
        head.z() += hover;
        height = prm.apex_height + hover;
      }
      out.head[static_cast<std::size_t>(k)] = head;
      out.height_above_surface[static_cast<std::size_t>(k)] = height;
    }

    // The stick pivots about a fulcrum held at constant height above the
    // surface: sin(pitch) tracks the head's height above apex.
    out.tail.resize(out.head.size());
    out.pitch.resize(out.head.size());
    for (std::size_t k = 0; k < out.head.size(); ++k) {
      const double sp = std::clamp(
          sin_approach + (out.height_above_surface[k] - prm.apex_height) / head_arm,
          -1.0, 1.0);
      const double pitch = std::asin(sp);
      out.pitch[k] = pitch;
      out.tail[k] = out.head[k] - cfg.stick.length * stick_direction(pitch, setup.yaw);
    }
  }
  return ref;
}

// Largest head displacement between consecutive steps over all hands.
inline double max_step_displacement(const ReferenceTrajectory& ref) {
  double m = 0.0;
  for (const auto& hand : ref.hands) {
    for (std::size_t k = 1; k < hand.head.size(); ++k) {
      m = std::max(m, (hand.head[k] - hand.head[k - 1]).norm());
    }
  }
  return m;
}

inline bool is_continuous(const ReferenceTrajectory& ref, double v_max) {
  return max_step_displacement(ref) <= v_max / ref.control_rate_hz + 1e-12;
}

// ---------------------------------------------------------------------------
// Nominal plan

enum class StrokeStyle {
  kFinger,  // the stick pivots in the fingers, the wrist holds the fulcrum
  kArm,     // the stick is held at a fixed pitch and the wrist moves it
};

struct HandNominal {
  std::vector<Vec3> wrist_target;
  std::vector<double> pitch_target;
  std::vector<std::array<double, 5>> closure_target;
};

struct NominalPlan {
  std::vector<HandNominal> hands;
  StrokeStyle style = StrokeStyle::kFinger;
};

inline double elevation(const Vec3& v) {
  return std::atan2(v.z(), std::hypot(v.x(), v.y()));
}

// Wrist = head + grasp_fraction * (tail - head); pitch is the elevation of
// head - tail. The arm style keeps the approach pitch and places the wrist so
// the head still follows the reference.
inline NominalPlan stick_to_wrist(const ReferenceTrajectory& ref,
                                  double grasp_fraction, double stick_length,
                                  double nominal_closure,
                                  StrokeStyle style = StrokeStyle::kFinger,
                                  double approach_pitch = 0.0,
                                  const std::vector<HandPlanSetup>& setup = {}) {
  if (!(grasp_fraction > 0.0 && grasp_fraction < 1.0)) {
    throw Error(ErrorKind::kBadConfig, "grasp_fraction must lie in (0, 1)");
  }
  NominalPlan plan;
  plan.style = style;
  plan.hands.resize(ref.hands.size());
  for (std::size_t h = 0; h < ref.hands.size(); ++h) {
    const auto& r = ref.hands[h];
    auto& n = plan.hands[h];
    const std::size_t len = r.head.size();
    n.wrist_target.resize(len);
    n.pitch_target.resize(len);
    n.closure_target.assign(len, std::array<double, 5>{
                                     nominal_closure, nominal_closure, nominal_closure,
                                     nominal_closure, nominal_closure});
    const double yaw = h < setup.size() ? setup[h].yaw : std::numbers::pi / 2.0;
    for (std::size_t k = 0; k < len; ++k) {
      if (style == StrokeStyle::kFinger) {
        n.wrist_target[k] = r.head[k] + grasp_fraction * (r.tail[k] - r.head[k]);
        n.pitch_target[k] = elevation(r.head[k] - r.tail[k]);
      } else {
        n.pitch_target[k] = approach_pitch;
        n.wrist_target[k] = r.head[k] - grasp_fraction * stick_length *
                                             stick_direction(approach_pitch, yaw);
      }
    }
  }
  return plan;
}

// `step<TAB>hand<TAB>hx hy hz<TAB>tx ty tz` per line.
inline std::string to_dump(const ReferenceTrajectory& ref) {
  std::ostringstream os;
  os.precision(9);
  for (int k = 0; k < ref.n_steps(); ++k) {
    for (std::size_t h = 0; h < ref.hands.size(); ++h) {
      const auto& hd = ref.hands[h].head[static_cast<std::size_t>(k)];
      const auto& tl = ref.hands[h].tail[static_cast<std::size_t>(k)];
      os << k << '\t' << h << '\t' << hd.x() << ' ' << hd.y() << ' ' << hd.z()
         << '\t' << tl.x() << ' ' << tl.y() << ' ' << tl.z() << '\n';
    }
  }
  return os.str();
}

}  // namespace dexdrum::choreo
