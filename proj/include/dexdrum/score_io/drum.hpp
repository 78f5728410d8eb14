#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace dexdrum::score {

// Seven-way drum vocabulary. `kNone` only ever appears as the "no previous /
// no next drum" observation value, never as a score event.
enum class DrumId : int {
  kSnare = 0,
  kTom = 1,
  kRide = 2,
  kHiHat = 3,
  kCrash = 4,
  kKick = 5,
  kNone = 6,
};

inline constexpr std::size_t kNumDrumIds = 7;

inline constexpr std::array<DrumId, 5> kPlayableDrums = {
    DrumId::kSnare, DrumId::kTom, DrumId::kRide, DrumId::kHiHat,
    DrumId::kCrash};

constexpr std::size_t index_of(DrumId d) { return static_cast<std::size_t>(d); }

constexpr std::string_view name_of(DrumId d) {
  switch (d) {
    case DrumId::kSnare: return "snare";
    case DrumId::kTom: return "tom";
    case DrumId::kRide: return "ride";
    case DrumId::kHiHat: return "hihat";
    case DrumId::kCrash: return "crash";
    case DrumId::kKick: return "kick";
    case DrumId::kNone: return "none";
  }
  return "none";
}

inline std::optional<DrumId> drum_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumDrumIds; ++i) {
    auto d = static_cast<DrumId>(i);
    if (name_of(d) == name) return d;
  }
  return std::nullopt;
}

constexpr bool is_playable(DrumId d) {
  return d != DrumId::kKick && d != DrumId::kNone;
}

}  // namespace dexdrum::score
