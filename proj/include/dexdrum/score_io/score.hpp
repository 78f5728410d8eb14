#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dexdrum/common/error.hpp"
#include "dexdrum/score_io/drum.hpp"

namespace dexdrum::score {

struct DrumEvent {
  double time_s = 0.0;
  DrumId drum = DrumId::kSnare;
  int velocity = 100;

  bool operator==(const DrumEvent&) const = default;
};

// A timed sequence of drum hits. Events are sorted by time and lie within
// [0, duration_s].
struct DrumScore {
  std::vector<DrumEvent> events;
  double duration_s = 0.0;
  double bpm = 120.0;
};

enum class KitProfile { kFullKit, kTwoDrum };

// General MIDI percussion note -> engine drum. Returns nullopt for notes the
// engine does not play (hand claps, shakers, ...). The two-drum profile folds
// cymbals onto the hi-hat and toms onto the snare.
inline std::optional<DrumId> map_percussion(int note_number, KitProfile kit) {
  std::optional<DrumId> full;
  switch (note_number) {
    case 38: case 40: full = DrumId::kSnare; break;
    case 45: case 47: case 48: case 50: full = DrumId::kTom; break;
    case 51: case 59: full = DrumId::kRide; break;
    case 42: case 44: case 46: full = DrumId::kHiHat; break;
    case 49: case 57: full = DrumId::kCrash; break;
    case 35: case 36: full = DrumId::kKick; break;
    default: break;
  }
  if (!full || kit == KitProfile::kFullKit) return full;
  switch (*full) {
    case DrumId::kCrash:
    case DrumId::kRide: return DrumId::kHiHat;
    case DrumId::kTom: return DrumId::kSnare;
    default: return full;
  }
}

inline DrumScore retime(const DrumScore& score, double slowdown) {
  if (!(slowdown > 0.0) || !std::isfinite(slowdown)) {
    throw Error(ErrorKind::kNonPositiveFactor,
                "slowdown must be positive, got " + std::to_string(slowdown));
  }
  DrumScore out = score;
  for (auto& e : out.events) e.time_s *= slowdown;
  out.duration_s *= slowdown;
  out.bpm /= slowdown;
  return out;
}

// Single-drum exercise: n_hits evenly spaced at the given tempo after a
// lead-in. Duration covers one further beat after the final hit.
inline DrumScore generate_exercise(double bpm, int n_hits, DrumId drum,
                                   double lead_in_s = 1.0) {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) {
    throw Error(ErrorKind::kNonPositiveBpm,
                "bpm must be positive, got " + std::to_string(bpm));
  }
  if (n_hits < 1) {
    throw Error(ErrorKind::kNonPositiveBpm, "n_hits must be at least 1");
  }
  const double interval = 60.0 / bpm;
  DrumScore s;
  s.bpm = bpm;
  s.events.reserve(static_cast<std::size_t>(n_hits));
  for (int i = 0; i < n_hits; ++i) {
    s.events.push_back({lead_in_s + i * interval, drum, 100});
  }
  s.duration_s = lead_in_s + n_hits * interval;
  return s;
}

// Builds a score from a compact letter pattern such as "ccdd": one hit per
// letter at a fixed interval. Used for the cymbal/drum sequence experiments.
inline DrumScore sequence_score(const std::string& pattern,
                                const std::vector<std::pair<char, DrumId>>& key,
                                double interval_s, double lead_in_s = 1.0) {
  DrumScore s;
  s.bpm = 60.0 / interval_s;
  double t = lead_in_s;
  for (char ch : pattern) {
    auto it = std::find_if(key.begin(), key.end(),
                           [ch](const auto& kv) { return kv.first == ch; });
    if (it == key.end()) {
      throw Error(ErrorKind::kUnassignedDrum,
                  std::string("pattern letter '") + ch + "' has no drum");
    }
    s.events.push_back({t, it->second, 100});
    t += interval_s;
  }
  s.duration_s = t;
  return s;
}

// Drops events the hands cannot play (the kick is pedal-driven).
inline DrumScore playable_only(const DrumScore& score) {
  DrumScore out = score;
  std::erase_if(out.events, [](const DrumEvent& e) { return !is_playable(e.drum); });
  return out;
}

// Drum -> hand index. Unset entries mean "no hand plays this drum".
using HandMap = std::array<std::optional<int>, kNumDrumIds>;

struct ScheduledHit {
  int step = 0;
  DrumId drum = DrumId::kSnare;

  bool operator==(const ScheduledHit&) const = default;
};

struct ScheduledScore {
  std::vector<std::vector<ScheduledHit>> hands;  // strictly increasing steps
  int window_halfwidth_steps = 2;
  double control_rate_hz = 20.0;

  int n_hands() const { return static_cast<int>(hands.size()); }
  std::size_t total_hits() const {
    std::size_t n = 0;
    for (const auto& h : hands) n += h.size();
    return n;
  }
};

inline ScheduledScore schedule(const DrumScore& score, double control_rate_hz,
                               const HandMap& assignment, int n_hands,
                               int window_halfwidth_steps = 2) {
  if (!(control_rate_hz > 0.0)) {
    throw Error(ErrorKind::kBadConfig, "control rate must be positive");
  }
  if (window_halfwidth_steps < 0) {
    throw Error(ErrorKind::kBadConfig, "hit window half-width must be >= 0");
  }
  ScheduledScore out;
  out.hands.resize(static_cast<std::size_t>(n_hands));
  out.window_halfwidth_steps = window_halfwidth_steps;
  out.control_rate_hz = control_rate_hz;
  for (const auto& e : score.events) {
    const auto& hand = assignment[index_of(e.drum)];
    if (!hand || *hand < 0 || *hand >= n_hands) {
      throw Error(ErrorKind::kUnassignedDrum,
                  std::string(name_of(e.drum)) + " has no hand");
    }
    const int step = static_cast<int>(std::lround(e.time_s * control_rate_hz));
    auto& list = out.hands[static_cast<std::size_t>(*hand)];
    if (!list.empty() && list.back().step >= step) {
      if (list.back().step == step) {
        if (list.back().drum == e.drum) continue;  // duplicate note
        throw Error(ErrorKind::kSameHandCollision,
                    "hand " + std::to_string(*hand) + " asked to play " +
                        std::string(name_of(list.back().drum)) + " and " +
                        std::string(name_of(e.drum)) + " at step " +
                        std::to_string(step));
      }
      // Input must be time-sorted; rounding keeps order for sorted input.
      throw Error(ErrorKind::kBadConfig, "score events are not time-sorted");
    }
    list.push_back({step, e.drum});
  }
  return out;
}

// Line-oriented `time_s<TAB>drum<TAB>velocity` export.
inline std::string to_text(const DrumScore& score) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& e : score.events) {
    os << e.time_s << '\t' << name_of(e.drum) << '\t' << e.velocity << '\n';
  }
  return os.str();
}

inline DrumScore from_text(const std::string& text, double duration_s = -1.0) {
  DrumScore s;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DrumEvent e;
    std::string name;
    if (!(ls >> e.time_s >> name >> e.velocity)) {
      throw Error(ErrorKind::kConfigError,
                  "line " + std::to_string(line_no) + ": expected time drum velocity");
    }
    auto d = drum_from_name(name);
    if (!d || *d == DrumId::kNone) {
      throw Error(ErrorKind::kConfigError,
                  "line " + std::to_string(line_no) + ": unknown drum " + name);
    }
    e.drum = *d;
    s.events.push_back(e);
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
  s.duration_s = duration_s >= 0.0
                     ? duration_s
                     : (s.events.empty() ? 0.0 : s.events.back().time_s);
  return s;
}

}  // namespace dexdrum::score
