#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vpb/characteristics.hpp"

using namespace vpb;

namespace {

FieldHistory free_ball() { return FieldHistory(ConvexDomain::ball(1.0)); }

// E = -grad phi for phi = a (r^2/2 - r^4/4): zero normal component on the unit sphere
FieldHistory radial_field(double a, bool decaying) {
  auto E = [a, decaying](double t, const Vec3& x) -> Vec3 {
    const double s = decaying ? std::exp(-std::abs(t)) : 1.0;
    return -a * s * (1.0 - x.squaredNorm()) * x;
  };
  auto G = [a, decaying](double t, const Vec3& x) -> Mat3 {
    const double s = decaying ? std::exp(-std::abs(t)) : 1.0;
    return -a * s * ((1.0 - x.squaredNorm()) * Mat3::Identity() - 2.0 * x * x.transpose());
  };
  return FieldHistory::analytic(ConvexDomain::ball(1.0), E, G);
}

double radial_potential(double a, const Vec3& x) {
  const double r2 = x.squaredNorm();
  return a * (0.5 * r2 - 0.25 * r2 * r2);
}

Vec3 random_in_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> U(-1, 1);
  for (;;) {
    const Vec3 x(U(rng), U(rng), U(rng));
    if (x.norm() < 1.0) return radius * x;
  }
}

Vec3 random_velocity(std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  return Vec3(N(rng), N(rng), N(rng));
}

}  // namespace

TEST(Characteristics, FreeStreamingTrace) {
  const auto H = free_ball();
  const PhasePoint p{1.0, Vec3::Zero(), Vec3(1, 0, 0)};
  const PhasePoint q = trace(p, H, 0.5);
  EXPECT_LT((q.x - Vec3(-0.5, 0, 0)).norm(), 1e-14);
  EXPECT_LT((q.v - p.v).norm(), 1e-14);
}

TEST(Characteristics, Reversibility) {
  const auto H = radial_field(0.3, true);
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.3), 0.5 * random_velocity(rng)};
    const PhasePoint q = trace(trace(p, H, 0.8), H, 1.0);
    EXPECT_LT((q.x - p.x).norm(), 1e-9);
    EXPECT_LT((q.v - p.v).norm(), 1e-9);
  }
}

TEST(Characteristics, EnergyConservedInFrozenField) {
  const double a = 0.5;
  const auto H = radial_field(a, false);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p{2.0, random_in_ball(rng, 0.4), 0.3 * random_velocity(rng)};
    const auto ex = backward_exit(p, H, 10.0);
    const double s = p.t - 0.9 * std::min(ex.t_b, 2.0);
    const PhasePoint q = trace(p, H, s);
    const double e0 = 0.5 * p.v.squaredNorm() + radial_potential(a, p.x);
    const double e1 = 0.5 * q.v.squaredNorm() + radial_potential(a, q.x);
    EXPECT_NEAR(e0, e1, 1e-9);
  }
}

TEST(Characteristics, BackwardExitChords) {
  const auto H = free_ball();
  const auto a = backward_exit({0.0, Vec3::Zero(), Vec3(0, 1, 0)}, H, 10.0);
  ASSERT_TRUE(a.hit);
  EXPECT_NEAR(a.t_b, 1.0, 1e-10);
  EXPECT_LT((a.x_b - Vec3(0, -1, 0)).norm(), 1e-10);
  EXPECT_NEAR(normal(H.domain(), a.x_b).dot(a.v_b), -1.0, 1e-10);
  const auto b = backward_exit({0.0, Vec3(0.5, 0, 0), Vec3(1, 0, 0)}, H, 10.0);
  EXPECT_NEAR(b.t_b, 1.5, 1e-10);
  EXPECT_LT((b.x_b - Vec3(-1, 0, 0)).norm(), 1e-10);
  EXPECT_FALSE(backward_exit({0.0, Vec3::Zero(), Vec3(0, 1, 0)}, H, 0.5).hit);
}

TEST(Characteristics, BackwardExitAgreesWithChordOracle) {
  const auto H = free_ball();
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const Vec3 x = random_in_ball(rng, 0.9), v = random_velocity(rng);
    const double xs[3] = {x[0], x[1], x[2]}, vs[3] = {v[0], v[1], v[2]};
    EXPECT_NEAR(backward_exit({0.0, x, v}, H, 100.0).t_b, oracle::ball_backward_exit(xs, vs), 1e-9);
  }
}

TEST(Characteristics, ForwardExitMirrorsBackward) {
  const auto H = free_ball();
  const auto a = forward_exit({0.0, Vec3::Zero(), Vec3(0, -1, 0)}, H, 10.0);
  EXPECT_NEAR(a.t_b, 1.0, 1e-10);
  EXPECT_LT((a.x_b - Vec3(0, -1, 0)).norm(), 1e-10);
  const auto b = forward_exit({0.0, Vec3(0.5, 0, 0), Vec3(-1, 0, 0)}, H, 10.0);
  EXPECT_NEAR(b.t_b, 1.5, 1e-10);
  EXPECT_LT((b.x_b - Vec3(-1, 0, 0)).norm(), 1e-10);
}

TEST(Characteristics, SmallDecayingFieldPerturbsExitTime) {
  const auto E = radial_field(0.01 / 0.25, true);  // |E| <= 0.01 e^{-|t|}
  const auto F = free_ball();
  std::mt19937_64 rng(10);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p{0.5, random_in_ball(rng, 0.5), random_velocity(rng).normalized()};
    EXPECT_NEAR(backward_exit(p, E, 10.0).t_b, backward_exit(p, F, 10.0).t_b, 0.01);
  }
}

TEST(Characteristics, NoGrazingHitsForNeumannField) {
  const auto H = radial_field(0.3, true);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.95), random_velocity(rng)};
    const auto ex = backward_exit(p, H, 50.0);
    if (!ex.hit) continue;
    EXPECT_LT(normal(H.domain(), ex.x_b).dot(ex.v_b), 0.0);
  }
}

TEST(Characteristics, ExitTimeTranslatesAlongFlow) {
  // time independent field: the decaying one has a kink at t = 0 that RK4 does not resolve
  const auto H = radial_field(0.3, false);
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.8), random_velocity(rng)};
    const auto ex = backward_exit(p, H, 50.0);
    ASSERT_TRUE(ex.hit);
    const double s = p.t - 0.4 * ex.t_b;
    const PhasePoint q = trace(p, H, s);
    EXPECT_NEAR(backward_exit(q, H, 50.0).t_b, ex.t_b - (p.t - s), 1e-8);
  }
}

TEST(Characteristics, KineticWeightBranches) {
  const auto H = free_ball();
  const WeightParams w{0.05};
  // no boundary contact within t + epsilon
  EXPECT_DOUBLE_EQ(kinetic_weight({0.2, Vec3::Zero(), Vec3(0, 0, 1)}, H, w), 1.0);
  // long after the contact: |n(x_b) . v_b|
  EXPECT_NEAR(kinetic_weight({1.2, Vec3::Zero(), Vec3(0, 0, 1)}, H, w), 1.0, 1e-10);
  EXPECT_NEAR(kinetic_weight({2.2, Vec3::Zero(), Vec3(0, 0, 0.5)}, H, w), 0.5, 1e-10);
  EXPECT_DOUBLE_EQ(kinetic_weight({1.2, Vec3::Zero(), Vec3(0, 0, 0.5)}, H, w), 1.0);
  // on the incoming boundary the weight is the normal velocity
  const Vec3 x(0, 0, -1), v(0.3, 0.1, 0.7);
  EXPECT_NEAR(kinetic_weight({1.0, x, v}, H, w), 0.7, 1e-9);
}

TEST(Characteristics, MollifierProfile) {
  const WeightParams w;
  EXPECT_EQ(w.chi(-0.5), 0.0);
  EXPECT_EQ(w.chi(1.5), 1.0);
  double max_slope = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double a = k / 1000.0, b = (k + 1) / 1000.0;
    EXPECT_LE(w.chi(a), w.chi(b));
    max_slope = std::max(max_slope, (w.chi(b) - w.chi(a)) * 1000.0);
  }
  EXPECT_LE(max_slope, 4.0);
}

TEST(Characteristics, FreeVariationalJacobian) {
  const auto H = free_ball();
  const PhasePoint p{1.0, Vec3(0.1, 0.0, 0.2), Vec3(0.3, -0.2, 0.1)};
  const auto r = variational_jacobian(p, H, 0.4);
  const Mat6& J = r.jacobian;
  const Mat3 xx = J.topLeftCorner<3, 3>(), xv = J.topRightCorner<3, 3>();
  const Mat3 vx = J.bottomLeftCorner<3, 3>(), vv = J.bottomRightCorner<3, 3>();
  EXPECT_LT((xx - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((xv - (0.4 - 1.0) * Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((vv - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(vx.norm(), 1e-12);
}

TEST(Characteristics, LiouvilleDeterminant) {
  const auto H = radial_field(0.5, true);
  std::mt19937_64 rng(13);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.5), 0.3 * random_velocity(rng)};
    EXPECT_NEAR(variational_jacobian(p, H, 0.5).jacobian.determinant(), 1.0, 1e-6);
  }
}

TEST(Characteristics, VelocityDerivativeOfPositionIsLinearInTime) {
  // |grad_v X(s)| <= C |t - s| for a weak decaying field
  const auto H = radial_field(0.01, true);
  std::mt19937_64 rng(14);
  double worst = 0.0;
  for (int k = 0; k < 30; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.3), 0.2 * random_velocity(rng)};
    for (double s : {0.8, 0.5, 0.2}) {
      const Mat3 dXdv = variational_jacobian(p, H, s).jacobian.topRightCorner<3, 3>();
      worst = std::max(worst, dXdv.norm() / (std::sqrt(3.0) * (p.t - s)));
    }
  }
  EXPECT_LE(worst, 1.05);
}

TEST(Characteristics, ExitMapJacobianFreeStreaming) {
  const auto H = free_ball();
  std::mt19937_64 rng(15);
  int used = 0;
  for (int k = 0; used < 100 && k < 400; ++k) {
    const PhasePoint p{0.0, random_in_ball(rng, 0.7), random_velocity(rng)};
    const auto J = exit_map_jacobian(p, H);
    if (std::abs(normal(H.domain(), J.exit.x_b).dot(J.exit.v_b)) < 0.1 * p.v.norm()) continue;
    ++used;
    EXPECT_NEAR(J.fd / J.analytic, 1.0, 0.01);
  }
  EXPECT_EQ(used, 100);
  const PhasePoint c{0.0, Vec3::Zero(), Vec3(0, 0, 1)};
  const auto j1 = exit_map_jacobian(c, H);
  const auto j2 = exit_map_jacobian({0.0, Vec3::Zero(), Vec3(0, 0, 2)}, H);
  EXPECT_NEAR(j1.exit.t_b, 1.0, 1e-10);
  EXPECT_NEAR(j2.exit.t_b, 0.5, 1e-10);
  EXPECT_NEAR(j2.fd / j1.fd, 1.0 / 16.0, 0.01 / 16.0);
}

TEST(Characteristics, ExitMapJacobianWeakField) {
  const auto H = radial_field(0.01, true);
  std::mt19937_64 rng(16);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p{1.0, random_in_ball(rng, 0.5), random_velocity(rng).normalized()};
    const auto J = exit_map_jacobian(p, H);
    EXPECT_NEAR(J.fd / J.analytic, 1.0, 0.05);
  }
}

TEST(Characteristics, VelocityLemmaEquivalenceFreeStreaming) {
  // in the unit ball tilde_alpha^2 = xi(x)^2 + 4 (x_b . v)^2 along free chords
  const auto H = free_ball();
  std::mt19937_64 rng(18);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint p{5.0, random_in_ball(rng, 0.9), 2.0 * random_velocity(rng)};
    const auto kw = kinetic_weight_ex(p, H);
    if (kw.grazing || !kw.exit.hit) continue;
    const double xi = p.x.squaredNorm() - 1.0, ta = tilde_alpha(H.domain(), p.x, p.v);
    EXPECT_NEAR(ta * ta / (xi * xi + 4.0 * kw.value * kw.value), 1.0, 1e-8);
    // bounded ratio once |v| dominates
    EXPECT_LE(ta / kw.value, 2.0 * std::sqrt(1.0 + 1.0 / (4.0 * kw.value * kw.value)));
  }
}

TEST(Characteristics, InverseMomentInteriorIsBallVolume) {
  const auto H = free_ball();
  const double N = 1.0;
  EXPECT_NEAR(alpha_inverse_moment(Vec3::Zero(), 0.01, H, 0.5, N), 4.0 / 3.0 * oracle::pi * N * N * N, 1e-6);
}

TEST(Characteristics, InverseMomentAtWallIsFinite) {
  const auto H = free_ball();
  const auto r = alpha_inverse_moment_ex(Vec3(0, 0, 1), 1.0, H, 0.5, 1.0);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_GT(r.value, 4.0 / 3.0 * oracle::pi);
  EXPECT_LE(std::abs(r.value - r.previous), 0.1 * r.value);
}

TEST(Characteristics, InverseMomentIntegrandMonotoneInSigma) {
  const auto H = free_ball();
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const PhasePoint p{1.0, Vec3(0, 0, 0.99), random_velocity(rng)};
    const double a = kinetic_weight(p, H);
    if (a > 1.0) continue;
    EXPECT_LE(std::pow(a, -0.3), std::pow(a, -0.5) + 1e-15);
    EXPECT_LE(std::pow(a, -0.5), std::pow(a, -0.7) + 1e-15);
  }
}
