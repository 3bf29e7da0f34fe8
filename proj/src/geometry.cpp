#include "vpb/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "vpb/errors.hpp"
#include "vpb/special.hpp"

namespace vpb {

namespace {

Box quadric_bbox(const Mat3& A, const Vec3& c) {
  const Mat3 Ainv = A.inverse();
  Box b;
  for (int i = 0; i < 3; ++i) {
    const double e = std::sqrt(Ainv(i, i));
    b.lo[i] = c[i] - e;
    b.hi[i] = c[i] + e;
  }
  return b;
}

}  // namespace

ConvexDomain ConvexDomain::ball(double radius) {
  ConvexDomain d = ellipsoid(Vec3::Constant(radius));
  d.name_ = "ball";
  return d;
}

ConvexDomain ConvexDomain::ellipsoid(const Vec3& semi_axes) {
  if ((semi_axes.array() <= 0.0).any()) throw ConfigError("ellipsoid semi-axes must be positive");
  ConvexDomain d;
  d.name_ = "ellipsoid";
  d.quadric_ = true;
  d.A_ = semi_axes.cwiseInverse().cwiseAbs2().asDiagonal();
  d.axes_ = semi_axes.asDiagonal();
  d.bbox_ = quadric_bbox(d.A_, d.center_);
  return d;
}

ConvexDomain ConvexDomain::from_level_set(std::string name, LevelSetFunctions fns, Box bbox,
                                          Vec3 interior_point) {
  ConvexDomain d;
  d.name_ = std::move(name);
  d.quadric_ = false;
  d.fns_ = std::move(fns);
  d.bbox_ = bbox;
  d.center_ = interior_point;
  return d;
}

ConvexDomain ConvexDomain::rotated(const Mat3& R) const {
  ConvexDomain d = *this;
  d.center_ = R * center_;
  d.frame_ = R * frame_;
  if (quadric_) {
    d.A_ = R * A_ * R.transpose();
    d.axes_ = R * axes_;
    d.bbox_ = quadric_bbox(d.A_, d.center_);
  } else {
    const LevelSetFunctions f = fns_;
    d.fns_.value = [f, R](const Vec3& x) { return f.value(R.transpose() * x); };
    d.fns_.gradient = [f, R](const Vec3& x) -> Vec3 { return R * f.gradient(R.transpose() * x); };
    d.fns_.hessian = [f, R](const Vec3& x) -> Mat3 {
      return R * f.hessian(R.transpose() * x) * R.transpose();
    };
    Box b{Vec3::Constant(std::numeric_limits<double>::infinity()),
          Vec3::Constant(-std::numeric_limits<double>::infinity())};
    for (int k = 0; k < 8; ++k) {
      Vec3 corner((k & 1) ? bbox_.hi.x() : bbox_.lo.x(), (k & 2) ? bbox_.hi.y() : bbox_.lo.y(),
                  (k & 4) ? bbox_.hi.z() : bbox_.lo.z());
      const Vec3 rc = R * corner;
      b.lo = b.lo.cwiseMin(rc);
      b.hi = b.hi.cwiseMax(rc);
    }
    d.bbox_ = b;
  }
  return d;
}

double ConvexDomain::level(const Vec3& x) const {
  if (quadric_) {
    const Vec3 y = x - center_;
    return y.dot(A_ * y) - 1.0;
  }
  return fns_.value(x);
}

Vec3 ConvexDomain::grad_level(const Vec3& x) const {
  if (quadric_) return 2.0 * (A_ * (x - center_));
  return fns_.gradient(x);
}

Mat3 ConvexDomain::hess_level(const Vec3& x) const {
  if (quadric_) return 2.0 * A_;
  return fns_.hessian(x);
}

double ConvexDomain::boundary_tolerance(const Vec3& x) const {
  return 1e-10 * (1.0 + grad_level(x).norm());
}

bool ConvexDomain::on_boundary(const Vec3& x) const {
  return std::abs(level(x)) <= boundary_tolerance(x);
}

std::optional<std::pair<double, double>> ConvexDomain::chord(const Vec3& p, const Vec3& d) const {
  if (quadric_) {
    const Vec3 y = p - center_;
    const Vec3 Ad = A_ * d;
    const double a = d.dot(Ad);
    const double b = 2.0 * y.dot(Ad);
    const double c = y.dot(A_ * y) - 1.0;
    if (a <= 0.0) return std::nullopt;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    // stable roots
    const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
    double s0, s1;
    if (q == 0.0) {
      s0 = s1 = 0.0;
    } else {
      s0 = q / a;
      s1 = c / q;
    }
    if (s0 > s1) std::swap(s0, s1);
    return std::make_pair(s0, s1);
  }
  // generic: march along the line through the bbox and bisect sign changes
  const double diag = (bbox_.hi - bbox_.lo).norm();
  const double dn = d.norm();
  if (dn == 0.0) return std::nullopt;
  const double span = 2.0 * (diag + (p - center_).norm()) / dn;
  const int n = 2000;
  double first = std::numeric_limits<double>::quiet_NaN(), last = first;
  double prev_s = -span, prev = level(p + prev_s * d);
  auto refine = [&](double a, double b) {
    double fa = level(p + a * d);
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = level(p + m * d);
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };
  for (int i = 1; i <= n; ++i) {
    const double s = -span + 2.0 * span * i / n;
    const double cur = level(p + s * d);
    if (prev >= 0 && cur < 0 && std::isnan(first)) first = refine(prev_s, s);
    if (prev < 0 && cur >= 0) last = refine(prev_s, s);
    prev = cur;
    prev_s = s;
  }
  if (std::isnan(first) || std::isnan(last)) return std::nullopt;
  return std::make_pair(first, last);
}

Vec3 ConvexDomain::ray_hit(const Vec3& dir) const {
  const Vec3 d = dir.normalized();
  if (quadric_) {
    auto c = chord(center_, d);
    return center_ + c->second * d;
  }
  double lo = 0.0, hi = 1e-3;
  while (level(center_ + hi * d) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw OutsideDomain("ray does not leave the domain");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double m = 0.5 * (lo + hi);
    if (level(center_ + m * d) < 0.0)
      lo = m;
    else
      hi = m;
  }
  return center_ + 0.5 * (lo + hi) * d;
}

Vec3 ConvexDomain::project(const Vec3& x) const {
  if ((x - center_).norm() < 1e-14) return ray_hit(frame_.col(2));
  Vec3 y = x;
  for (int it = 0; it < 60; ++it) {
    const double f = level(y);
    const Vec3 g = grad_level(y);
    const double g2 = g.squaredNorm();
    if (g2 < 1e-20) return ray_hit(x - center_);
    y -= (f / g2) * g;
    if (std::abs(f) <= 1e-14 * (1.0 + std::sqrt(g2))) break;
  }
  return y;
}

double ConvexDomain::distance_to_boundary(const Vec3& x) const {
  const double dist = (project(x) - x).norm();
  return level(x) < 0 ? -dist : dist;
}

Vec3 ConvexDomain::surface_point(double theta, double phi) const {
  const Vec3 s(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
  return center_ + axes_ * s;
}

Vec3 ConvexDomain::surface_tangent(double theta, double phi, int which) const {
  const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
  if (which == 0) return axes_ * Vec3(ct * cp, ct * sp, -st);
  return axes_ * Vec3(-st * sp, st * cp, 0.0);
}

double level(const ConvexDomain& domain, const Vec3& x) { return domain.level(x); }

Vec3 normal(const ConvexDomain& domain, const Vec3& x) {
  const Vec3 g = domain.grad_level(x);
  const double gn = g.norm();
  if (gn < 1e-6) throw DegenerateGradient("level-set gradient vanishes");
  return g / gn;
}

ConvexityReport check_convexity(const ConvexDomain& domain, int n_samples) {
  if (n_samples < 1) throw ConfigError("check_convexity needs at least one sample");
  int n_theta = std::max(3, static_cast<int>(std::lround(std::sqrt(n_samples / 2.0))));
  if (n_theta % 2 == 0) ++n_theta;  // keep the equator
  int n_phi = std::max(4, (n_samples + n_theta - 1) / n_theta);
  n_phi = (n_phi + 3) / 4 * 4;  // keep quarter turns
  double margin = std::numeric_limits<double>::infinity();
  int count = 0;
  for (int i = 0; i < n_theta; ++i) {
    const double th = kPi * i / (n_theta - 1);
    const int nph = (i == 0 || i == n_theta - 1) ? 1 : n_phi;
    for (int j = 0; j < nph; ++j) {
      const double ph = kTwoPi * j / n_phi;
      const Vec3 local(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
      const Vec3 x = domain.ray_hit(domain.frame() * local);
      const Vec3 g = domain.grad_level(x);
      const double gn = g.norm();
      if (gn < 1e-6) throw DegenerateGradient("level-set gradient vanishes on the boundary");
      const Vec3 n = g / gn;
      Vec3 t1, t2;
      tangent_basis(n, t1, t2);
      const Mat3 H = domain.hess_level(x);
      Eigen::Matrix2d M;
      M << t1.dot(H * t1), t1.dot(H * t2), t2.dot(H * t1), t2.dot(H * t2);
      M /= gn;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M);
      margin = std::min(margin, es.eigenvalues()(0));
      ++count;
    }
  }
  if (!(margin > 0.0)) throw ConvexityViolated(margin);
  return {margin, count};
}

double tilde_alpha(const ConvexDomain& domain, const Vec3& x, const Vec3& v) {
  const double xi = domain.level(x);
  const double gv = domain.grad_level(x).dot(v);
  const double vHv = v.dot(domain.hess_level(x) * v);
  return std::sqrt(std::max(0.0, xi * xi + gv * gv - 2.0 * vHv * xi));
}

std::vector<SurfacePoint> boundary_quadrature(const ConvexDomain& domain, int order) {
  if (order < 1) throw ConfigError("boundary quadrature order must be positive");
  if (!domain.has_parametrization())
    throw ConfigError("boundary quadrature needs a parametrized domain");
  const QuadratureRule gl = gauss_legendre(order, 0.0, kPi);
  const int n_phi = 2 * order;
  const double dphi = kTwoPi / n_phi;
  std::vector<SurfacePoint> pts;
  pts.reserve(static_cast<std::size_t>(order) * n_phi);
  for (int i = 0; i < order; ++i) {
    const double th = gl.nodes[i];
    for (int j = 0; j < n_phi; ++j) {
      const double ph = (j + 0.5) * dphi;
      const Vec3 x = domain.surface_point(th, ph);
      const Vec3 xt = domain.surface_tangent(th, ph, 0);
      const Vec3 xp = domain.surface_tangent(th, ph, 1);
      SurfacePoint sp;
      sp.position = x;
      sp.normal = normal(domain, x);
      sp.quad_weight = gl.weights[i] * dphi * xt.cross(xp).norm();
      pts.push_back(sp);
    }
  }
  return pts;
}

ConvexDomain make_domain(const std::string& name, const Vec3& semi_axes) {
  if (name == "ball") return ConvexDomain::ball(1.0);
  if (name == "ellipsoid") return ConvexDomain::ellipsoid(semi_axes);
  throw ConfigError("unknown domain '" + name + "'");
}

}  // namespace vpb
