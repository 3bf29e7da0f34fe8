#pragma once

#include <vector>

#include "vpb/velocity.hpp"

namespace vpb {

// Weights W_j with sum_j W_j F(v_j) ~ int_{n.u > 0} F(u) (n.u) du. Along every
// grid line parallel to the axis most aligned with n, the half-line indicator
// is integrated against the sinc interpolant of F (n.u), so the cut at
// n.u = 0 costs no accuracy.
std::vector<double> half_space_weights(const VelocityGrid& grid, const Vec3& n);

}  // namespace vpb
