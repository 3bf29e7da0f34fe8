#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vpb/errors.hpp"
#include "vpb/geometry.hpp"

using namespace vpb;

namespace {

ConvexDomain dumbbell() {
  LevelSetFunctions f;
  f.value = [](const Vec3& x) {
    const double a = x[0] * x[0];
    return x[1] * x[1] + x[2] * x[2] - 0.2 - 0.8 * a + a * a;
  };
  f.gradient = [](const Vec3& x) { return Vec3(-1.6 * x[0] + 4 * x[0] * x[0] * x[0], 2 * x[1], 2 * x[2]); };
  f.hessian = [](const Vec3& x) {
    Mat3 h = Mat3::Zero();
    h(0, 0) = -1.6 + 12 * x[0] * x[0];
    h(1, 1) = h(2, 2) = 2.0;
    return h;
  };
  return ConvexDomain::from_level_set("dumbbell", f, Box{Vec3(-1.1, -0.7, -0.7), Vec3(1.1, 0.7, 0.7)}, Vec3::Zero());
}

Mat3 some_rotation() {
  return (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()) * Eigen::AngleAxisd(-1.1, Vec3::UnitZ()))
      .toRotationMatrix();
}

}  // namespace

TEST(Geometry, LevelOfUnitBall) {
  const auto ball = ConvexDomain::ball();
  EXPECT_DOUBLE_EQ(level(ball, Vec3::Zero()), -1.0);
  EXPECT_NEAR(level(ball, Vec3(1, 0, 0)), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(level(ball, Vec3(2, 0, 0)), 3.0);
  EXPECT_TRUE(ball.contains(Vec3(0.3, 0.3, 0.3)));
  EXPECT_FALSE(ball.contains(Vec3(1.01, 0, 0)));
}

TEST(Geometry, Normals) {
  const auto ball = ConvexDomain::ball();
  EXPECT_LT((normal(ball, Vec3(0, 0, 1)) - Vec3(0, 0, 1)).norm(), 1e-14);
  EXPECT_LT((normal(ball, Vec3(1, 0, 0)) - Vec3(1, 0, 0)).norm(), 1e-14);
  const auto ell = ConvexDomain::ellipsoid(Vec3(2, 1, 1));
  EXPECT_LT((normal(ell, Vec3(2, 0, 0)) - Vec3(1, 0, 0)).norm(), 1e-14);
}

TEST(Geometry, NormalOrthogonalToFiniteDifferenceTangents) {
  const auto ell = ConvexDomain::ellipsoid(Vec3(2, 1, 1));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.2, 2.9), P(0.0, 6.28);
  for (int k = 0; k < 50; ++k) {
    const double th = U(rng), ph = P(rng), d = 1e-6;
    const Vec3 x = ell.surface_point(th, ph);
    const Vec3 n = normal(ell, x);
    const Vec3 t1 = (ell.surface_point(th + d, ph) - ell.surface_point(th - d, ph)) / (2 * d);
    const Vec3 t2 = (ell.surface_point(th, ph + d) - ell.surface_point(th, ph - d)) / (2 * d);
    EXPECT_NEAR(n.dot(t1.normalized()), 0.0, 1e-6);
    EXPECT_NEAR(n.dot(t2.normalized()), 0.0, 1e-6);
  }
}

TEST(Geometry, ConvexityMargins) {
  EXPECT_NEAR(check_convexity(ConvexDomain::ball(), 1000).min_curvature_margin, 1.0, 1e-8);
  EXPECT_NEAR(check_convexity(ConvexDomain::ellipsoid(Vec3(2, 1, 1)), 1000).min_curvature_margin, 0.25, 1e-6);
}

TEST(Geometry, ConvexityMarginRotationInvariant) {
  const auto ell = ConvexDomain::ellipsoid(Vec3(2, 1, 1));
  const double a = check_convexity(ell, 1000).min_curvature_margin;
  const double b = check_convexity(ell.rotated(some_rotation()), 1000).min_curvature_margin;
  EXPECT_NEAR(a, b, 1e-8);
}

TEST(Geometry, NonConvexDomainRejected) { EXPECT_THROW(check_convexity(dumbbell(), 500), ConvexityViolated); }

TEST(Geometry, TildeAlphaExamples) {
  const auto ball = ConvexDomain::ball();
  EXPECT_NEAR(tilde_alpha(ball, Vec3(1, 0, 0), Vec3(0, 1, 0)), 0.0, 1e-12);
  EXPECT_NEAR(tilde_alpha(ball, Vec3(1, 0, 0), Vec3(1, 0, 0)), 2.0, 1e-12);
  EXPECT_NEAR(tilde_alpha(ball, Vec3::Zero(), Vec3::Zero()), 1.0, 1e-12);
  const Vec3 v(0.3, -0.4, 1.2);
  EXPECT_NEAR(tilde_alpha(ball, Vec3::Zero(), v), std::sqrt(1.0 + 4.0 * v.squaredNorm()), 1e-12);
}

TEST(Geometry, TildeAlphaOnBoundaryIsNormalVelocity) {
  const auto ell = ConvexDomain::ellipsoid(Vec3(2, 1, 1));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = ell.ray_hit(Vec3(N(rng), N(rng), N(rng)));
    const Vec3 v(N(rng), N(rng), N(rng));
    EXPECT_NEAR(tilde_alpha(ell, x, v), std::abs(ell.grad_level(x).dot(v)), 1e-8);
  }
}

TEST(Geometry, BallQuadratureArea) {
  const auto q = boundary_quadrature(ConvexDomain::ball(), 16);
  double area = 0.0;
  Vec3 ndS = Vec3::Zero();
  for (const auto& p : q) {
    area += p.quad_weight;
    ndS += p.quad_weight * p.normal;
    EXPECT_NEAR(p.position.norm(), 1.0, 1e-12);
  }
  EXPECT_NEAR(area / (4 * oracle::pi), 1.0, 5e-3);
  EXPECT_LT(ndS.norm(), 1e-10);
}

TEST(Geometry, EllipsoidQuadratureMatchesSpheroidArea) {
  const auto q = boundary_quadrature(ConvexDomain::ellipsoid(Vec3(2, 1, 1)), 16);
  double area = 0.0;
  for (const auto& p : q) area += p.quad_weight;
  EXPECT_NEAR(area / oracle::prolate_spheroid_area(2.0, 1.0), 1.0, 5e-3);
}

TEST(Geometry, ChordOfBall) {
  const auto ball = ConvexDomain::ball();
  const auto c = ball.chord(Vec3(0.5, 0, 0), Vec3(-1, 0, 0));
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR(c->first, -0.5, 1e-14);
  EXPECT_NEAR(c->second, 1.5, 1e-14);
  EXPECT_FALSE(ball.chord(Vec3(0, 2, 0), Vec3(1, 0, 0)).has_value());
}

TEST(Geometry, BoundaryClassification) {
  const auto ball = ConvexDomain::ball();
  EXPECT_TRUE(ball.on_boundary(Vec3(0, 1, 0)));
  EXPECT_TRUE(ball.on_boundary(Vec3(0, 1 + 1e-12, 0)));
  EXPECT_FALSE(ball.on_boundary(Vec3(0, 1 + 1e-6, 0)));
  EXPECT_NEAR(ball.distance_to_boundary(Vec3(0.25, 0, 0)), -0.75, 1e-9);
  EXPECT_NEAR(ball.distance_to_boundary(Vec3(0, 0, 1.5)), 0.5, 1e-9);
}
