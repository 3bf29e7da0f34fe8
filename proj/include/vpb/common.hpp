#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace vpb {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// (2 pi)^{-3/2}
inline constexpr double kMaxwellNorm = 0.063493635934240969;

inline double maxwellian(const Vec3& v) { return kMaxwellNorm * std::exp(-0.5 * v.squaredNorm()); }
inline double sqrt_maxwellian(const Vec3& v) {
  return 0.25197943553838073 * std::exp(-0.25 * v.squaredNorm());
}

// Orthonormal pair spanning the plane orthogonal to the unit vector n.
inline void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  Vec3 a = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  t1 = (a - a.dot(n) * n).normalized();
  t2 = n.cross(t1);
}

}  // namespace vpb
