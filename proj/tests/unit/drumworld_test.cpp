#include <gtest/gtest.h>

#include <random>

#include "dexdrum/drumworld/world.hpp"
#include "dexdrum/rewards_obs/observation.hpp"

using namespace dexdrum;
using namespace dexdrum::world;

namespace {

// Holds the thumb/index pinch at the nominal closure and drives the last three
// fingers to `mrl`.
Action hold(double mrl, double pinch = 0.75, int n_hands = 1) {
  Action a;
  a.hands.resize(static_cast<std::size_t>(n_hands));
  for (auto& h : a.hands) h.closure_targets = {pinch, pinch, mrl, mrl, mrl};
  return a;
}

Action random_action(std::mt19937_64& rng, double clip) {
  std::uniform_real_distribution<double> d(-clip, clip), c(0.0, 1.0), p(0.6, 1.0);
  Action a;
  a.hands.resize(1);
  a.hands[0].wrist_delta = Vec3(d(rng), d(rng), d(rng));
  const double pinch = p(rng);
  a.hands[0].closure_targets = {pinch, pinch, c(rng), c(rng), c(rng)};
  return a;
}

double head_height_over_snare(const WorldConfig& cfg, const WorldState& s) {
  return s.hands[0].stick.head_pos.z() - cfg.layout.at(DrumId::kSnare).surface_point().z();
}

}  // namespace

TEST(Reset, DeterministicAndRandomized) {
  WorldConfig cfg;
  EXPECT_TRUE(reset(cfg, 5) == reset(cfg, 5));
  auto plain = reset(cfg, 5);
  EXPECT_EQ(plain.physics.gain_scale, 1.0);
  EXPECT_EQ(plain.physics.friction_offset, 0.0);

  cfg.randomize = true;
  auto a = reset(cfg, 5), b = reset(cfg, 6);
  EXPECT_NE(a.physics.gain_scale, b.physics.gain_scale);
  EXPECT_TRUE(a.hands[0].hand.stick_held);
  EXPECT_EQ(a.hands[0].hand.grip, 1.0);
}

TEST(Reset, RandomizationRanges) {
  WorldConfig cfg;
  cfg.randomize = true;
  double gmin = 2, gmax = 0, fmin = 1, fmax = -1;
  for (std::uint64_t seed = 0; seed < 20000; ++seed) {
    auto s = reset(cfg, seed);
    gmin = std::min(gmin, s.physics.gain_scale);
    gmax = std::max(gmax, s.physics.gain_scale);
    fmin = std::min(fmin, s.physics.friction_offset);
    fmax = std::max(fmax, s.physics.friction_offset);
  }
  EXPECT_GE(gmin, 0.9);
  EXPECT_LE(gmax, 1.1);
  EXPECT_GE(fmin, -0.2);
  EXPECT_LE(fmax, 0.2);
  // The ranges are actually explored.
  EXPECT_LT(gmin, 0.91);
  EXPECT_GT(gmax, 1.09);
}

TEST(Reset, BadConfig) {
  WorldConfig cfg;
  cfg.hands.resize(3);
  try {
    reset(cfg, 0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kBadConfig);
  }
  WorldConfig bad;
  bad.grasp_fraction = 1.0;
  EXPECT_THROW(reset(bad, 0), Error);
}

TEST(Step, GravityPullsTheHeadDown) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  const double before = s.hands[0].stick.head_pos.z();
  // Last three fingers open: no finger torque holds the stick up.
  for (int f = 2; f < kFingers; ++f) s.hands[0].hand.closure[f] = 0.0;
  Action a = hold(0.0);
  step(cfg, s, a);
  EXPECT_LT(s.hands[0].stick.pitch_vel, 0.0);
  EXPECT_LT(s.hands[0].stick.head_pos.z(), before);
}

TEST(Step, CurriculumDisablesDrumContact) {
  WorldConfig cfg;
  cfg.hands[0].pitch = -0.26;  // head just under the snare surface
  cfg.curriculum_active = true;
  cfg.curriculum_steps = 10000;
  auto s = reset(cfg, 0);
  ASSERT_LT(head_height_over_snare(cfg, s), 0.0);
  set_contact_curriculum(s, 9999, cfg.curriculum_steps);
  auto ev = step(cfg, s, hold(closure_for_pitch(cfg, -0.26)));
  EXPECT_TRUE(ev.drum_contacts.empty());

  auto t = reset(cfg, 0);
  set_contact_curriculum(t, 10000, cfg.curriculum_steps);
  auto ev2 = step(cfg, t, hold(closure_for_pitch(cfg, -0.26)));
  ASSERT_FALSE(ev2.drum_contacts.empty());
  EXPECT_EQ(ev2.drum_contacts[0].drum, DrumId::kSnare);
}

TEST(Curriculum, Boundary) {
  WorldState s;
  set_contact_curriculum(s, 9999, 10000);
  EXPECT_FALSE(s.curriculum_contact_enabled);
  set_contact_curriculum(s, 10000, 10000);
  EXPECT_TRUE(s.curriculum_contact_enabled);
  set_contact_curriculum(s, 0, 0);
  EXPECT_TRUE(s.curriculum_contact_enabled);
  EXPECT_THROW(set_contact_curriculum(s, 0, -1), Error);
}

TEST(Curriculum, NeverReDisables) {
  WorldState s;
  bool seen_on = false;
  for (long g = 0; g < 30000; g += 7) {
    set_contact_curriculum(s, g, 10000);
    if (seen_on) {
      EXPECT_TRUE(s.curriculum_contact_enabled);
    }
    seen_on = seen_on || s.curriculum_contact_enabled;
  }
  EXPECT_TRUE(seen_on);
}

TEST(Grip, SqueezeWithoutImpactNeverLosesGrip) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  s.hands[0].hand.grip = 0.5;
  double prev = s.hands[0].hand.grip;
  for (int k = 0; k < 40; ++k) {
    auto ev = step(cfg, s, hold(closure_for_pitch(cfg, 0.0), 0.9));
    ASSERT_TRUE(ev.drum_contacts.empty());
    EXPECT_GE(s.hands[0].hand.grip, prev);
    prev = s.hands[0].hand.grip;
  }
  EXPECT_GT(prev, 0.5);
}

TEST(Grip, ImpactCostsExactlyKSlipTimesImpulse) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  // Swing down until the first contact, at neutral pinch (no recovery).
  for (int k = 0; k < 20; ++k) {
    const double before = s.hands[0].hand.grip;
    auto ev = step(cfg, s, hold(1.0));
    if (ev.drum_contacts.empty()) {
      EXPECT_EQ(s.hands[0].hand.grip, before);
      continue;
    }
    double j = 0.0;
    for (const auto& c : ev.drum_contacts) {
      EXPECT_GE(c.normal_impulse, 0.0);
      j += c.normal_impulse;
    }
    EXPECT_GT(j, 0.0);
    EXPECT_NEAR(s.hands[0].hand.grip, before - cfg.k_slip * j, 1e-12);
    return;
  }
  FAIL() << "stick never reached the drum";
}

TEST(Grip, HeavySlipDropsTheStick) {
  WorldConfig cfg;
  cfg.k_slip = 1e4;
  auto s = reset(cfg, 0);
  for (int k = 0; k < 20 && s.hands[0].hand.stick_held; ++k) step(cfg, s, hold(1.0));
  EXPECT_FALSE(s.hands[0].hand.stick_held);
  EXPECT_TRUE(s.hands[0].dropped_this_episode);
  EXPECT_LT(s.hands[0].hand.grip, cfg.grip_drop_threshold);
  auto ev = step(cfg, s, hold(1.0));
  EXPECT_EQ(ev.fingertip_contacts[0], 0);
}

TEST(Grip, OpeningThePinchReleases) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  for (int k = 0; k < 20; ++k) step(cfg, s, hold(0.4, 0.0));
  EXPECT_FALSE(s.hands[0].hand.stick_held);
}

TEST(Fingertips, LinearBetweenOpenAndClosed) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  auto& slot = s.hands[0];
  for (double c : {1.0, 0.0, 0.5}) {
    slot.hand.closure.fill(c);
    auto tips = fingertip_positions(cfg, slot.hand, slot.stick, slot.yaw);
    const Vec3 u = stick_direction(slot.stick.pitch, slot.yaw);
    const Vec3 station = slot.hand.wrist_pos - cfg.finger_stations[0] * u;
    EXPECT_NEAR((tips[0] - station).norm(), (1.0 - c) * 0.04, 1e-15);
  }
  slot.hand.closure = {1.0, 1.0, 0.0, 0.0, 0.0};
  auto tips = fingertip_positions(cfg, slot.hand, slot.stick, slot.yaw);
  EXPECT_NEAR((tips[0] - fulcrum_point(cfg, slot.stick)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((tips[1] - fulcrum_point(cfg, slot.stick)).norm(), 0.0, 1e-12);
  EXPECT_EQ(count_fingertip_contacts(cfg, slot.hand), 2);
}

TEST(DetectHits, OnsetAndThreshold) {
  ContactEvents ev;
  ev.drum_contacts = {{0, DrumId::kSnare, 0.01, 0.8, true}};
  EXPECT_EQ(detect_hits(ev, 0.2).size(), 1u);
  ev.drum_contacts = {{0, DrumId::kSnare, 0.01, 0.1, true}};
  EXPECT_TRUE(detect_hits(ev, 0.2).empty());
  ev.drum_contacts = {{0, DrumId::kSnare, 0.0, 0.8, false}};
  EXPECT_TRUE(detect_hits(ev, 0.2).empty());
}

TEST(DetectHits, RestingContactHitsOnce) {
  WorldConfig cfg;
  cfg.k_slip = 0.0;  // keep the stick in hand while it presses on the head
  cfg.hands[0].pitch = -0.2;
  auto s = reset(cfg, 0);
  int hits = 0, contact_steps = 0;
  for (int k = 0; k < 30; ++k) {
    auto ev = step(cfg, s, hold(closure_for_pitch(cfg, -0.4)));
    hits += static_cast<int>(detect_hits(ev, cfg.hit_speed_threshold).size());
    contact_steps += ev.drum_contacts.empty() ? 0 : 1;
  }
  EXPECT_GE(contact_steps, 10);
  EXPECT_EQ(hits, 1);
}

TEST(Step, NonFiniteStateIsFatal) {
  WorldConfig cfg;
  auto s = reset(cfg, 0);
  s.hands[0].stick.pitch_vel = std::nan("");
  try {
    step(cfg, s, hold(0.5));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonFiniteState);
  }
}

TEST(WorldProperty, EnergyNeverGrowsWithoutDrive) {
  WorldConfig cfg;
  cfg.curriculum_active = true;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pitch(-0.9, 0.7), vel(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = reset(cfg, static_cast<std::uint64_t>(trial));
    set_contact_curriculum(s, 0, cfg.curriculum_steps);
    s.hands[0].stick.pitch = pitch(rng);
    s.hands[0].stick.pitch_vel = vel(rng);
    for (int f = 2; f < kFingers; ++f) s.hands[0].hand.closure[f] = 0.0;
    place_stick(cfg, s.hands[0]);
    double e = stick_mechanical_energy(cfg, s.hands[0]);
    for (int k = 0; k < 20; ++k) {
      step(cfg, s, hold(0.0));
      const double e2 = stick_mechanical_energy(cfg, s.hands[0]);
      EXPECT_LE(e2, e + 1e-3);
      e = e2;
    }
  }
}

TEST(WorldProperty, RigidStickImpulsesAndDeterminism) {
  WorldConfig cfg;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = reset(cfg, static_cast<std::uint64_t>(trial));
    auto twin = s;
    for (int k = 0; k < 60; ++k) {
      const auto a = random_action(rng, cfg.action_clip);
      auto ev = step(cfg, s, a);
      step(cfg, twin, a);
      ASSERT_TRUE(s == twin);
      for (const auto& c : ev.drum_contacts) EXPECT_GE(c.normal_impulse, 0.0);
      EXPECT_LE(ev.fingertip_contacts[0], 5);
      const auto& hs = s.hands[0];
      if (hs.hand.stick_held) {
        EXPECT_NEAR((hs.stick.head_pos - hs.stick.tail_pos).norm(), cfg.stick_length, 1e-6);
        EXPECT_GE(hs.hand.grip, cfg.grip_drop_threshold);
      }
      for (double c : hs.hand.closure) {
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
      }
    }
  }
}

TEST(DomainRandomization, ObservationNoise) {
  WorldConfig cfg;
  cfg.randomize = true;
  reward::ObservationLayout layout(1, 6, 10, 10);
  auto s = reset(cfg, 3);
  std::vector<double> base(layout.size(), 0.25);

  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  while (n < 100000) {
    auto obs = base;
    reward::apply_domain_randomization(cfg, layout, obs, s);
    for (const auto& b : layout.blocks()) {
      for (std::size_t i = 0; i < b.size; ++i) {
        const double d = obs[b.offset + i] - base[b.offset + i];
        if (!b.noisy) {
          ASSERT_EQ(d, 0.0) << b.name;
          continue;
        }
        sum += d;
        sq += d * d;
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_GE(sd, 0.049);
  EXPECT_LE(sd, 0.051);

  cfg.randomize = false;
  auto obs = base;
  reward::apply_domain_randomization(cfg, layout, obs, s);
  EXPECT_EQ(obs, base);
}
