#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vpb/common.hpp"

namespace vpb {

struct Box {
  Vec3 lo;
  Vec3 hi;
};

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
  double quad_weight = 0.0;
};

struct ConvexityReport {
  double min_curvature_margin = 0.0;
  int samples = 0;
};

struct LevelSetFunctions {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
  std::function<Mat3(const Vec3&)> hessian;
};

// Omega = {xi < 0}. Built-in domains are quadrics xi = (x-c)^T A (x-c) - 1,
// which get closed-form chords and a spherical surface parametrization.
class ConvexDomain {
 public:
  static ConvexDomain ball(double radius = 1.0);
  static ConvexDomain ellipsoid(const Vec3& semi_axes);
  static ConvexDomain from_level_set(std::string name, LevelSetFunctions fns, Box bbox,
                                     Vec3 interior_point);

  ConvexDomain rotated(const Mat3& rotation) const;

  const std::string& name() const { return name_; }
  double level(const Vec3& x) const;
  Vec3 grad_level(const Vec3& x) const;
  Mat3 hess_level(const Vec3& x) const;
  const Box& bbox() const { return bbox_; }
  const Vec3& interior_point() const { return center_; }
  const Mat3& frame() const { return frame_; }
  bool is_quadric() const { return quadric_; }

  double boundary_tolerance(const Vec3& x) const;
  bool on_boundary(const Vec3& x) const;
  bool contains(const Vec3& x) const { return level(x) < 0.0; }

  // Parameter interval [s0, s1] of the line p + s d inside the closure, if any.
  std::optional<std::pair<double, double>> chord(const Vec3& p, const Vec3& d) const;

  // Boundary point on the ray from the interior point in direction dir.
  Vec3 ray_hit(const Vec3& dir) const;

  // Nearest-ish boundary point by Newton iteration along the gradient.
  Vec3 project(const Vec3& x) const;

  // Signed distance estimate -xi/|grad xi| refined by projection.
  double distance_to_boundary(const Vec3& x) const;

  // Surface map (theta, phi) -> x for quadrics; false otherwise.
  bool has_parametrization() const { return quadric_; }
  Vec3 surface_point(double theta, double phi) const;
  // derivative of surface_point in theta (which = 0) or phi (which = 1)
  Vec3 surface_tangent(double theta, double phi, int which) const;

 private:
  std::string name_;
  bool quadric_ = false;
  Mat3 A_ = Mat3::Identity();
  Mat3 axes_ = Mat3::Identity();  // columns: scaled principal axes
  LevelSetFunctions fns_;
  Vec3 center_ = Vec3::Zero();
  Mat3 frame_ = Mat3::Identity();
  Box bbox_;
};

double level(const ConvexDomain& domain, const Vec3& x);
Vec3 normal(const ConvexDomain& domain, const Vec3& x);
ConvexityReport check_convexity(const ConvexDomain& domain, int n_samples);
double tilde_alpha(const ConvexDomain& domain, const Vec3& x, const Vec3& v);
std::vector<SurfacePoint> boundary_quadrature(const ConvexDomain& domain, int order);

// Built-in selection by config name.
ConvexDomain make_domain(const std::string& name, const Vec3& semi_axes);

}  // namespace vpb
