#pragma once

#include <cmath>

#include <Eigen/Core>

namespace dexdrum {

using Vec3 = Eigen::Vector3d;

// Direction of a stick with the given pitch (elevation) and yaw (heading in
// the horizontal plane).
inline Vec3 stick_direction(double pitch, double yaw) {
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
          std::sin(pitch)};
}

// d/d(pitch) of stick_direction.
inline Vec3 stick_direction_dpitch(double pitch, double yaw) {
  return {-std::sin(pitch) * std::cos(yaw), -std::sin(pitch) * std::sin(yaw),
          std::cos(pitch)};
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace dexdrum
