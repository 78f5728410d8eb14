#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "dexdrum/common/error.hpp"
#include "dexdrum/common/geometry.hpp"
#include "dexdrum/score_io/drum.hpp"

namespace dexdrum::choreo {

using score::DrumId;

struct DrumPad {
  Vec3 center = Vec3::Zero();  // center of the striking surface
  double radius = 0.15;
  double head_height = 0.0;  // surface offset along the normal from center
  Vec3 normal = Vec3::UnitZ();

  Vec3 surface_point() const { return center + head_height * normal; }
};

// Pads keyed by drum. A missing entry means the drum is not part of the kit.
struct DrumLayout {
  std::array<std::optional<DrumPad>, score::kNumDrumIds> pads;

  bool has(DrumId d) const { return pads[score::index_of(d)].has_value(); }
  const DrumPad& at(DrumId d) const {
    const auto& p = pads[score::index_of(d)];
    if (!p) {
      throw Error(ErrorKind::kUnreachableDrum,
                  std::string(score::name_of(d)) + " is not in the layout");
    }
    return *p;
  }
  void set(DrumId d, const DrumPad& pad) { pads[score::index_of(d)] = pad; }
};

// Checks radius, normal and non-intersection invariants.
inline void validate(const DrumLayout& layout) {
  for (std::size_t i = 0; i < layout.pads.size(); ++i) {
    const auto& p = layout.pads[i];
    if (!p) continue;
    const auto name = std::string(score::name_of(static_cast<DrumId>(i)));
    if (!(p->radius > 0.0)) {
      throw Error(ErrorKind::kBadLayout, name + ": radius must be positive");
    }
    if (std::abs(p->normal.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::kBadLayout, name + ": normal must be unit length");
    }
    for (std::size_t j = i + 1; j < layout.pads.size(); ++j) {
      const auto& q = layout.pads[j];
      if (!q) continue;
      // Conservative disc test: bounding spheres must not overlap.
      const double gap = (p->surface_point() - q->surface_point()).norm();
      if (gap <= p->radius + q->radius) {
        throw Error(ErrorKind::kBadLayout,
                    name + " intersects " +
                        std::string(score::name_of(static_cast<DrumId>(j))));
      }
    }
  }
}

// Five-piece kit seen from the player (x to the player's right, y forward,
// z up). The kick sits on the floor, out of the sticks' reach.
inline DrumLayout full_kit_layout() {
  DrumLayout l;
  l.set(DrumId::kHiHat, {{-0.32, 0.45, 0.78}, 0.16, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kCrash, {{-0.40, 0.82, 0.98}, 0.18, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kSnare, {{0.08, 0.45, 0.68}, 0.16, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kTom, {{0.12, 0.80, 0.80}, 0.14, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kRide, {{0.50, 0.62, 0.88}, 0.20, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kKick, {{0.0, 0.60, 0.25}, 0.22, 0.0, Vec3{0.0, -1.0, 0.0}});
  return l;
}

// Snare plus hi-hat, the reduced real-world setup.
inline DrumLayout two_drum_layout() {
  DrumLayout l;
  l.set(DrumId::kHiHat, {{-0.32, 0.45, 0.78}, 0.16, 0.0, Vec3::UnitZ()});
  l.set(DrumId::kSnare, {{0.08, 0.45, 0.68}, 0.16, 0.0, Vec3::UnitZ()});
  return l;
}

}  // namespace dexdrum::choreo
