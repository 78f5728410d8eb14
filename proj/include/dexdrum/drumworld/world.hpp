#pragma once

// Reduced hand-stick-drum world. Each hand is a PD-driven wrist point that
// doubles as the stick fulcrum, five finger closures, and a stick that pivots
// in pitch about the fulcrum. The last three fingers drive the pitch, thumb
// and index hold the fulcrum. Drumheads push back through a penalty
// spring-damper; impacts erode a scalar grip which squeezing restores.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dexdrum/choreography/layout.hpp"
#include "dexdrum/common/error.hpp"
#include "dexdrum/common/geometry.hpp"
#include "dexdrum/score_io/drum.hpp"

namespace dexdrum::world {

using choreo::DrumLayout;
using score::DrumId;

inline constexpr int kFingers = 5;  // thumb, index, middle, ring, little
using Closure = std::array<double, kFingers>;

struct HandRest {
  Vec3 wrist = {0.08, 0.18, 0.74};
  double pitch = 0.0;
  double yaw = std::numbers::pi / 2.0;
};

struct WorldConfig {
  DrumLayout layout = choreo::full_kit_layout();
  std::vector<HandRest> hands{HandRest{}};

  // Rates: policy step = pd_substeps controller ticks, each physics_substeps
  // integrator steps.
  double policy_hz = 20.0;
  int pd_substeps = 5;       // 100 Hz controller
  int physics_substeps = 5;  // 500 Hz integrator

  // Stick.
  double stick_length = 0.40;
  double stick_mass = 0.05;
  double grasp_fraction = 2.0 / 3.0;  // fulcrum distance from head / length
  double pitch_min = -1.0;
  double pitch_max = 0.8;
  double pitch_damping = 0.002;  // N m s / rad, bearing friction at the fulcrum

  // Wrist servo.
  double wrist_mass = 1.0;
  double wrist_kp = 2500.0;
  double wrist_kd = 100.0;
  double action_clip = 0.05;  // m per policy step

  // Fingers.
  double closure_time_constant = 0.04;
  double finger_stiffness = 2.0;  // N m / rad at full engagement
  double finger_damping = 0.04;
  double pitch_open = 0.5;     // commanded pitch with last fingers open
  double pitch_closed = -0.7;  // commanded pitch with last fingers closed
  double fingertip_open_offset = 0.04;
  double touch_closure = 0.35;  // closure at which a fingertip touches
  // Station of each finger along the stick, measured from the fulcrum toward
  // the butt end.
  Closure finger_stations = {0.0, 0.0, 0.02, 0.04, 0.06};

  // Drumhead contact.
  double contact_stiffness = 5000.0;
  double contact_damping = 50.0;
  double hit_speed_threshold = 0.2;

  // Grip.
  double k_slip = 20.0;         // grip lost per N s of impact impulse
  double k_recover = 4.0;       // 1/s per unit of squeeze above nominal
  double grip_nominal_closure = 0.75;
  double grip_drop_threshold = 0.2;
  double initial_closure = 0.75;  // thumb/index closure of the initial grasp
  double release_closure = 0.3;   // below this the fingers let go
  double k_release = 5.0;         // 1/s grip loss while released
  double base_friction = 1.0;

  // Domain randomization.
  bool randomize = false;
  double obs_noise_std = 0.05;
  double friction_noise = 0.2;
  double gain_scale_min = 0.9;
  double gain_scale_max = 1.1;

  // Contact curriculum.
  bool curriculum_active = false;
  long curriculum_steps = 10000;

  double gravity = 9.81;

  int n_hands() const { return static_cast<int>(hands.size()); }
  double head_arm() const { return grasp_fraction * stick_length; }
  double butt_arm() const { return (1.0 - grasp_fraction) * stick_length; }
  double com_offset() const { return head_arm() - 0.5 * stick_length; }
  double pitch_inertia() const {
    const double d = com_offset();
    return stick_mass * (stick_length * stick_length / 12.0 + d * d);
  }
  double physics_dt() const {
    return 1.0 / (policy_hz * pd_substeps * physics_substeps);
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::kBadConfig, m); };
    if (hands.empty() || hands.size() > 2) bad("1 or 2 hands supported");
    if (!(policy_hz > 0.0) || pd_substeps < 1 || physics_substeps < 1) bad("rates");
    if (!(stick_length > 0.0) || !(stick_mass > 0.0)) bad("stick");
    if (!(grasp_fraction > 0.0 && grasp_fraction < 1.0)) bad("grasp_fraction");
    if (!(pitch_min < pitch_max)) bad("pitch limits");
    if (!(wrist_mass > 0.0) || wrist_kp < 0.0 || wrist_kd < 0.0) bad("wrist gains");
    if (!(closure_time_constant > 0.0)) bad("closure time constant");
    if (contact_stiffness < 0.0 || contact_damping < 0.0) bad("contact constants");
    if (k_slip < 0.0 || k_recover < 0.0) bad("grip constants");
    if (!(grip_drop_threshold >= 0.0 && grip_drop_threshold <= 1.0)) bad("drop threshold");
    if (!(gain_scale_min > 0.0 && gain_scale_min <= gain_scale_max)) bad("gain range");
    if (friction_noise < 0.0 || obs_noise_std < 0.0) bad("noise");
    if (curriculum_steps < 0) bad("curriculum N");
    choreo::validate(layout);
  }
};

struct HandState {
  Vec3 wrist_pos = Vec3::Zero();
  Vec3 wrist_vel = Vec3::Zero();
  Closure closure{};
  Closure closure_vel{};
  double grip = 1.0;
  bool stick_held = true;
};

struct StickState {
  Vec3 head_pos = Vec3::Zero();
  Vec3 tail_pos = Vec3::Zero();
  Vec3 head_vel = Vec3::Zero();
  Vec3 tail_vel = Vec3::Zero();
  double pitch = 0.0;
  double pitch_vel = 0.0;
};

struct PhysicsParams {
  double friction_offset = 0.0;
  double gain_scale = 1.0;
};

struct HandSlot {
  HandState hand;
  StickState stick;
  double yaw = std::numbers::pi / 2.0;
  Vec3 arm_force = Vec3::Zero();  // torque proxy: mean wrist servo force, N
  // Per-drum contact bookkeeping for onset detection and impulse accounting.
  std::array<bool, score::kNumDrumIds> in_contact{};
  bool dropped_this_episode = false;
};

struct WorldState {
  std::vector<HandSlot> hands;
  long global_step = 0;
  long episode_step = 0;
  bool curriculum_contact_enabled = true;
  PhysicsParams physics;
  std::mt19937_64 rng;

  bool operator==(const WorldState& o) const {
    if (hands.size() != o.hands.size()) return false;
    for (std::size_t i = 0; i < hands.size(); ++i) {
      const auto& a = hands[i];
      const auto& b = o.hands[i];
      if (a.hand.wrist_pos != b.hand.wrist_pos || a.hand.wrist_vel != b.hand.wrist_vel ||
          a.hand.closure != b.hand.closure || a.hand.closure_vel != b.hand.closure_vel ||
          a.hand.grip != b.hand.grip || a.hand.stick_held != b.hand.stick_held ||
          a.stick.head_pos != b.stick.head_pos || a.stick.tail_pos != b.stick.tail_pos ||
          a.stick.head_vel != b.stick.head_vel || a.stick.tail_vel != b.stick.tail_vel ||
          a.stick.pitch != b.stick.pitch || a.stick.pitch_vel != b.stick.pitch_vel ||
          a.arm_force != b.arm_force || a.in_contact != b.in_contact) {
        return false;
      }
    }
    return global_step == o.global_step && episode_step == o.episode_step &&
           curriculum_contact_enabled == o.curriculum_contact_enabled &&
           physics.friction_offset == o.physics.friction_offset &&
           physics.gain_scale == o.physics.gain_scale && rng == o.rng;
  }
};

struct HandAction {
  Vec3 wrist_delta = Vec3::Zero();
  Closure closure_targets{};
};

struct Action {
  std::vector<HandAction> hands;
};

struct DrumContact {
  int hand = 0;
  DrumId drum = DrumId::kSnare;
  double normal_impulse = 0.0;       // N s delivered while closing in
  double tip_speed_at_impact = 0.0;  // m/s along the normal at onset
  bool onset = false;                // contact began during this step
};

struct ContactEvents {
  std::vector<int> fingertip_contacts;  // per hand, 0..5
  std::vector<DrumContact> drum_contacts;
};

struct HitEvent {
  int hand = 0;
  DrumId drum = DrumId::kSnare;

  bool operator==(const HitEvent&) const = default;
};

// Kinematic map from a desired stick pitch to the mean closure of the last
// three fingers (ignores gravity sag).
inline double closure_for_pitch(const WorldConfig& cfg, double pitch) {
  return std::clamp((cfg.pitch_open - pitch) / (cfg.pitch_open - cfg.pitch_closed),
                    0.0, 1.0);
}

inline void place_stick(const WorldConfig& cfg, HandSlot& slot) {
  const Vec3 u = stick_direction(slot.stick.pitch, slot.yaw);
  const Vec3 du = stick_direction_dpitch(slot.stick.pitch, slot.yaw);
  const Vec3& w = slot.hand.wrist_pos;
  slot.stick.head_pos = w + cfg.head_arm() * u;
  slot.stick.tail_pos = w - cfg.butt_arm() * u;
  slot.stick.head_vel = slot.hand.wrist_vel + cfg.head_arm() * slot.stick.pitch_vel * du;
  slot.stick.tail_vel = slot.hand.wrist_vel - cfg.butt_arm() * slot.stick.pitch_vel * du;
}

inline WorldState reset(const WorldConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WorldState s;
  s.rng.seed(seed);
  if (cfg.randomize) {
    std::uniform_real_distribution<double> gain(cfg.gain_scale_min, cfg.gain_scale_max);
    std::uniform_real_distribution<double> fric(-cfg.friction_noise, cfg.friction_noise);
    s.physics.gain_scale = gain(s.rng);
    s.physics.friction_offset = fric(s.rng);
  }
  s.curriculum_contact_enabled = !cfg.curriculum_active || cfg.curriculum_steps <= 0;
  s.hands.resize(cfg.hands.size());
  for (std::size_t h = 0; h < cfg.hands.size(); ++h) {
    auto& slot = s.hands[h];
    slot.yaw = cfg.hands[h].yaw;
    slot.hand.wrist_pos = cfg.hands[h].wrist;
    slot.stick.pitch = std::clamp(cfg.hands[h].pitch, cfg.pitch_min, cfg.pitch_max);
    const double c = closure_for_pitch(cfg, slot.stick.pitch);
    slot.hand.closure = {cfg.initial_closure, cfg.initial_closure, c, c, c};
    place_stick(cfg, slot);
  }
  return s;
}

// Curriculum gate: contact is enabled once the global training step reaches N.
inline void set_contact_curriculum(WorldState& state, long global_training_step,
                                   long n) {
  if (n < 0) throw Error(ErrorKind::kBadConfig, "curriculum N must be >= 0");
  state.global_step = global_training_step;
  state.curriculum_contact_enabled = global_training_step >= n;
}

// Thumb and index sit at the fulcrum station; the other three behind it.
// Each tip moves linearly from an open pose (open_offset off the stick) to its
// station as closure goes 0 -> 1.
inline std::array<Vec3, kFingers> fingertip_positions(const WorldConfig& cfg,
                                                      const HandState& hand,
                                                      const StickState& stick,
                                                      double yaw) {
  const Vec3 u = stick_direction(stick.pitch, yaw);
  const Vec3 up = stick_direction_dpitch(stick.pitch, yaw);
  std::array<Vec3, kFingers> tips;
  for (int f = 0; f < kFingers; ++f) {
    const Vec3 station = hand.wrist_pos - cfg.finger_stations[f] * u;
    const Vec3 dir = f == 0 ? up : Vec3(-up);
    tips[f] = station + (1.0 - hand.closure[f]) * cfg.fingertip_open_offset * dir;
  }
  return tips;
}

// Point on the stick the thumb and index should pinch.
inline Vec3 fulcrum_point(const WorldConfig& cfg, const StickState& stick) {
  return stick.head_pos + cfg.grasp_fraction * (stick.tail_pos - stick.head_pos);
}

inline int count_fingertip_contacts(const WorldConfig& cfg, const HandState& hand) {
  if (!hand.stick_held) return 0;
  int n = 0;
  for (double c : hand.closure) n += c >= cfg.touch_closure ? 1 : 0;
  return n;
}

// A hit is a contact onset whose approach speed reaches the threshold.
inline std::vector<HitEvent> detect_hits(const ContactEvents& events,
                                         double v_threshold) {
  std::vector<HitEvent> hits;
  for (const auto& c : events.drum_contacts) {
    if (c.onset && c.tip_speed_at_impact >= v_threshold) {
      HitEvent e{c.hand, c.drum};
      if (std::find(hits.begin(), hits.end(), e) == hits.end()) hits.push_back(e);
    }
  }
  return hits;
}

namespace detail {

struct PadContact {
  bool touching = false;
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();
};

inline PadContact probe(const choreo::DrumPad& pad, const Vec3& p) {
  PadContact c;
  const Vec3 rel = p - pad.surface_point();
  const double h = rel.dot(pad.normal);
  const Vec3 radial = rel - h * pad.normal;
  // A thin slab under the head; deeper points are treated as under the drum.
  if (h < 0.0 && h > -0.05 && radial.norm() <= pad.radius) {
    c.touching = true;
    c.depth = -h;
    c.normal = pad.normal;
  }
  return c;
}

inline bool finite_slot(const HandSlot& s) {
  return s.hand.wrist_pos.allFinite() && s.hand.wrist_vel.allFinite() &&
         s.stick.head_pos.allFinite() && s.stick.tail_pos.allFinite() &&
         std::isfinite(s.stick.pitch) && std::isfinite(s.stick.pitch_vel) &&
         std::isfinite(s.hand.grip);
}

}  // namespace detail

// Advances one policy step in place and reports the contacts it produced.
inline ContactEvents step(const WorldConfig& cfg, WorldState& state,
                          const Action& action) {
  if (action.hands.size() != state.hands.size()) {
    throw Error(ErrorKind::kBadConfig, "action hand count does not match world");
  }
  const double dt = cfg.physics_dt();
  const double gs = state.physics.gain_scale;
  const double friction = std::max(1e-3, cfg.base_friction + state.physics.friction_offset);
  const double inertia = cfg.pitch_inertia();
  const double head_arm = cfg.head_arm();
  const double mgd = cfg.stick_mass * cfg.gravity * cfg.com_offset();
  const bool contact_on = state.curriculum_contact_enabled;

  ContactEvents events;
  events.fingertip_contacts.assign(state.hands.size(), 0);

  for (std::size_t h = 0; h < state.hands.size(); ++h) {
    auto& slot = state.hands[h];
    auto& hand = slot.hand;
    auto& stick = slot.stick;
    const auto& act = action.hands[h];

    Vec3 delta = act.wrist_delta;
    for (int i = 0; i < 3; ++i) {
      delta[i] = std::clamp(delta[i], -cfg.action_clip, cfg.action_clip);
    }
    const Vec3 target = hand.wrist_pos + delta;
    Closure ctarget;
    for (int f = 0; f < kFingers; ++f) {
      ctarget[f] = std::clamp(act.closure_targets[f], 0.0, 1.0);
    }

    // Per-drum accumulators for this step.
    std::array<double, score::kNumDrumIds> impulse{};
    std::array<double, score::kNumDrumIds> onset_speed{};
    std::array<bool, score::kNumDrumIds> onset{};
    std::array<bool, score::kNumDrumIds> touched{};
    Vec3 force_sum = Vec3::Zero();

    for (int pd = 0; pd < cfg.pd_substeps; ++pd) {
      const Vec3 force =
          gs * (cfg.wrist_kp * (target - hand.wrist_pos) - cfg.wrist_kd * hand.wrist_vel);
      force_sum += force;
      for (int ps = 0; ps < cfg.physics_substeps; ++ps) {
        // Wrist point, semi-implicit Euler.
        hand.wrist_vel += dt * force / cfg.wrist_mass;
        hand.wrist_pos += dt * hand.wrist_vel;

        // First-order closure tracking.
        for (int f = 0; f < kFingers; ++f) {
          hand.closure_vel[f] = gs * (ctarget[f] - hand.closure[f]) / cfg.closure_time_constant;
          hand.closure[f] = std::clamp(hand.closure[f] + dt * hand.closure_vel[f], 0.0, 1.0);
        }

        if (!hand.stick_held) {
          // Dropped: the stick falls rigidly until it lands on the floor.
          if (stick.head_pos.z() <= 0.0 || stick.tail_pos.z() <= 0.0) {
            stick.head_vel.setZero();
            stick.tail_vel.setZero();
            continue;
          }
          const Vec3 g(0.0, 0.0, -cfg.gravity);
          stick.head_vel += dt * g;
          stick.tail_vel += dt * g;
          stick.head_pos += dt * stick.head_vel;
          stick.tail_pos += dt * stick.tail_vel;
          continue;
        }

        const double th = stick.pitch;
        const Vec3 u = stick_direction(th, slot.yaw);
        const Vec3 du = stick_direction_dpitch(th, slot.yaw);
        const Vec3 head = hand.wrist_pos + head_arm * u;

        const double mrl = (hand.closure[2] + hand.closure[3] + hand.closure[4]) / 3.0;
        const double cmd = cfg.pitch_open - mrl * (cfg.pitch_open - cfg.pitch_closed);
        const double k_f = gs * cfg.finger_stiffness * mrl;
        const double d_f = gs * cfg.finger_damping * mrl + cfg.pitch_damping;

        double torque = -mgd * std::cos(th) + k_f * (cmd - th);
        double damping = d_f;

        // Drumhead contact: spring explicit, damper implicit; the pad may
        // only push.
        int contact_drum = -1;
        detail::PadContact pc;
        if (contact_on) {
          for (std::size_t d = 0; d < cfg.layout.pads.size(); ++d) {
            const auto& pad = cfg.layout.pads[d];
            if (!pad) continue;
            auto c = detail::probe(*pad, head);
            if (c.touching && (contact_drum < 0 || c.depth > pc.depth)) {
              pc = c;
              contact_drum = static_cast<int>(d);
            }
          }
        }
        double new_vel;
        double normal_force = 0.0;
        double vn_before = 0.0;
        if (contact_drum >= 0) {
          const double jn = head_arm * du.dot(pc.normal);  // d(v_n)/d(pitch_vel)
          const double vn_wrist = hand.wrist_vel.dot(pc.normal);
          vn_before = vn_wrist + jn * stick.pitch_vel;
          const double kspring = cfg.contact_stiffness * pc.depth;
          const double c = cfg.contact_damping;
          const double t_c = torque + jn * (kspring - c * vn_wrist);
          const double d_c = damping + c * jn * jn;
          new_vel = (stick.pitch_vel + dt * t_c / inertia) / (1.0 + dt * d_c / inertia);
          normal_force = kspring - c * (vn_wrist + jn * new_vel);
          if (normal_force <= 0.0) {
            normal_force = 0.0;
            new_vel = (stick.pitch_vel + dt * torque / inertia) / (1.0 + dt * damping / inertia);
          }
        } else {
          new_vel = (stick.pitch_vel + dt * torque / inertia) / (1.0 + dt * damping / inertia);
        }

        stick.pitch_vel = new_vel;
        stick.pitch += dt * stick.pitch_vel;
        if (stick.pitch < cfg.pitch_min) {
          stick.pitch = cfg.pitch_min;
          stick.pitch_vel = std::max(0.0, stick.pitch_vel);
        } else if (stick.pitch > cfg.pitch_max) {
          stick.pitch = cfg.pitch_max;
          stick.pitch_vel = std::min(0.0, stick.pitch_vel);
        }

        // Contact bookkeeping.
        for (std::size_t d = 0; d < score::kNumDrumIds; ++d) {
          const bool now = static_cast<int>(d) == contact_drum;
          if (now) {
            touched[d] = true;
            if (!slot.in_contact[d]) {
              onset[d] = true;
              onset_speed[d] = std::max(onset_speed[d], -vn_before);
            }
            if (vn_before < 0.0) {
              const double j = normal_force * dt;
              impulse[d] += j;
              hand.grip -= cfg.k_slip * j / friction;
            }
          }
          slot.in_contact[d] = now;
        }

        // Grip: squeeze above nominal restores it, letting go loses it.
        const double pinch = 0.5 * (hand.closure[0] + hand.closure[1]);
        hand.grip += dt * cfg.k_recover * std::max(0.0, pinch - cfg.grip_nominal_closure);
        if (pinch < cfg.release_closure) hand.grip -= dt * cfg.k_release;
        hand.grip = std::clamp(hand.grip, 0.0, 1.0);

        place_stick(cfg, slot);
        if (hand.grip < cfg.grip_drop_threshold) {
          hand.stick_held = false;
          slot.dropped_this_episode = true;
          slot.in_contact.fill(false);
        }
      }
    }
    slot.arm_force = force_sum / static_cast<double>(cfg.pd_substeps);

    for (std::size_t d = 0; d < score::kNumDrumIds; ++d) {
      if (touched[d]) {
        events.drum_contacts.push_back({static_cast<int>(h), static_cast<DrumId>(d),
                                        impulse[d], onset_speed[d], onset[d]});
      }
    }
    events.fingertip_contacts[h] = count_fingertip_contacts(cfg, hand);
    if (!detail::finite_slot(slot)) {
      throw Error(ErrorKind::kNonFiniteState,
                  "hand " + std::to_string(h) + " state became non-finite");
    }
  }
  ++state.episode_step;
  return events;
}

struct StepResult {
  WorldState state;
  ContactEvents events;
};

// Value-semantics form of step().
inline StepResult step_copy(const WorldConfig& cfg, WorldState state,
                            const Action& action) {
  auto ev = step(cfg, state, action);
  return {std::move(state), std::move(ev)};
}

inline double stick_mechanical_energy(const WorldConfig& cfg, const HandSlot& slot) {
  const double com_z =
      slot.hand.wrist_pos.z() + cfg.com_offset() * std::sin(slot.stick.pitch);
  return 0.5 * cfg.pitch_inertia() * slot.stick.pitch_vel * slot.stick.pitch_vel +
         cfg.stick_mass * cfg.gravity * com_z;
}

}  // namespace dexdrum::world
