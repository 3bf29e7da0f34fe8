#include <gtest/gtest.h>

#include <random>

#include "vpb/diagnostics.hpp"
#include "vpb/errors.hpp"
#include "vpb/solver.hpp"

using namespace vpb;

namespace {

struct Grids {
  std::shared_ptr<const SpatialGrid> space;
  std::shared_ptr<const VelocityGrid> velocity;
};

Grids grids(int n_x, int n_v, double v_max = 6.0) {
  return {std::make_shared<const SpatialGrid>(ConvexDomain::ball(1.0), n_x),
          std::make_shared<const VelocityGrid>(v_max, n_v)};
}

PerturbationField make_f(const Grids& g, const std::function<double(const Vec3&, const Vec3&)>& fn) {
  PerturbationField f{g.space, g.velocity, {}, 0.0, 0.1};
  const std::size_t ns = g.space->n_interior();
  f.values.resize(ns * g.velocity->size());
  for (std::size_t j = 0; j < g.velocity->size(); ++j)
    for (std::size_t i = 0; i < ns; ++i)
      f.values[j * ns + i] = fn(g.space->interior_position(i), g.velocity->node(j));
  return f;
}

// E = -grad phi for phi = a (r^2/2 - r^4/4), decaying in |t|
FieldHistory decaying_field(double a) {
  auto E = [a](double t, const Vec3& x) -> Vec3 { return -a * std::exp(-std::abs(t)) * (1.0 - x.squaredNorm()) * x; };
  auto G = [a](double t, const Vec3& x) -> Mat3 {
    return -a * std::exp(-std::abs(t)) * ((1.0 - x.squaredNorm()) * Mat3::Identity() - 2.0 * x * x.transpose());
  };
  return FieldHistory::analytic(ConvexDomain::ball(1.0), E, G);
}

}  // namespace

TEST(Diagnostics, TotalMassOfEquilibrium) {
  const auto g = grids(16, 24);
  const DistributionField mu = DistributionField::maxwellian(g.space, g.velocity);
  const double m = total_mass(mu);
  EXPECT_NEAR(m / (4.0 * kPi / 3.0), 1.0, 1e-3);
  DistributionField two = mu;
  for (double& x : two.data()) x *= 2.0;
  EXPECT_NEAR(total_mass(two), 2.0 * m, 1e-13 * m);
  DistributionField zero(g.space, g.velocity);
  EXPECT_EQ(total_mass(zero), 0.0);
}

TEST(Diagnostics, WeightedSupNorm) {
  const auto g = grids(6, 25);  // odd count puts a node at v = 0
  const auto zero = make_f(g, [](const Vec3&, const Vec3&) { return 0.0; });
  EXPECT_EQ(weighted_sup_norm(zero, 0.1), 0.0);
  const auto sm = make_f(g, [](const Vec3&, const Vec3& v) { return sqrt_maxwellian(v); });
  EXPECT_NEAR(weighted_sup_norm(sm, 0.125), std::pow(2 * kPi, -0.75), 1e-14);
  auto twice = sm;
  for (double& x : twice.values) x *= 2.0;
  EXPECT_NEAR(weighted_sup_norm(twice, 0.125), 2.0 * weighted_sup_norm(sm, 0.125), 1e-15);
  const auto bump = make_f(g, [](const Vec3& x, const Vec3& v) { return x[0] * v.squaredNorm() * sqrt_maxwellian(v); });
  double prev = 0.0;
  for (double th : {0.01, 0.05, 0.1, 0.2, 0.24}) {
    const double w = weighted_sup_norm(bump, th);
    EXPECT_GE(w, prev);
    prev = w;
  }
}

TEST(Diagnostics, ExponentAdmissibility) {
  EXPECT_NO_THROW(check_exponents(0.6, 4.0));
  EXPECT_THROW(check_exponents(0.4, 4.0), BadExponents);
  EXPECT_THROW(check_exponents(0.6, 3.0), BadExponents);
  EXPECT_THROW(check_exponents(0.7, 5.0), BadExponents);
  const auto g = grids(6, 8);
  const auto c = make_f(g, [](const Vec3&, const Vec3&) { return 0.3; });
  const FieldHistory H(ConvexDomain::ball(1.0));
  EXPECT_THROW(alpha_weighted_w1p(c, H, 0.4, 4.0), BadExponents);
}

TEST(Diagnostics, W1pOfConstantIsZero) {
  const auto g = grids(6, 8);
  const auto c = make_f(g, [](const Vec3&, const Vec3&) { return 0.3; });
  const FieldHistory H(ConvexDomain::ball(1.0));
  EXPECT_EQ(alpha_weighted_w1p(c, H, 0.6, 4.0), 0.0);
}

TEST(Diagnostics, W1pIsFiniteAndHomogeneous) {
  const auto g = grids(6, 8);
  const auto f = make_f(g, [](const Vec3& x, const Vec3& v) { return std::sin(x[0]) * v[1] * sqrt_maxwellian(v); });
  FieldHistory H(ConvexDomain::ball(1.0));
  const double a = alpha_weighted_w1p(f, H, 0.6, 4.0);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_GT(a, 0.0);
  auto f3 = f;
  for (double& x : f3.values) x *= 3.0;
  EXPECT_NEAR(alpha_weighted_w1p(f3, H, 0.6, 4.0), 3.0 * a, 1e-12 * a);
}

TEST(Diagnostics, MacroscopicProjection) {
  const VelocityGrid g(6.0, 20);
  std::vector<double> sm(g.sqrt_mu()), v1(g.size()), r(g.size());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  for (std::size_t j = 0; j < g.size(); ++j) {
    v1[j] = g.node(j)[0] * sm[j];
    r[j] = N(rng) * sm[j];
  }
  const MacroMoments a = macroscopic_projection(g, sm);
  EXPECT_NEAR(a.a, 1.0, 1e-10);
  EXPECT_LT(a.b.norm(), 1e-10);
  EXPECT_NEAR(a.c, 0.0, 1e-10);
  const MacroMoments b = macroscopic_projection(g, v1);
  EXPECT_NEAR(b.b[0], 1.0, 1e-10);
  EXPECT_NEAR(b.a, 0.0, 1e-10);
  EXPECT_NEAR(b.b[1], 0.0, 1e-10);

  const MacroMoments m = macroscopic_projection(g, r);
  const std::vector<double> pf = reconstruct(g, m);
  // residual orthogonal to the basis
  for (int k = 0; k < 5; ++k) {
    double s = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Vec3 v = g.node(j);
      const double basis[5] = {1.0, v[0], v[1], v[2], 0.5 * (v.squaredNorm() - 3.0)};
      s += (r[j] - pf[j]) * basis[k] * sm[j];
      scale += std::abs(r[j] * basis[k] * sm[j]);
    }
    EXPECT_LE(std::abs(s), 1e-10 * scale);
  }
  // idempotence
  const std::vector<double> ppf = reconstruct(g, macroscopic_projection(g, pf));
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(ppf[j], pf[j], 1e-10);
}

TEST(Diagnostics, DecayFitOnSyntheticSeries) {
  std::vector<double> t, e, c;
  for (int k = 0; k <= 50; ++k) {
    t.push_back(0.1 * k);
    e.push_back(2.0 * std::exp(-0.3 * t.back()));
    c.push_back(1.5);
  }
  const DecayFit fe = decay_fit(t, e);
  EXPECT_NEAR(fe.rate, 0.3, 1e-6);
  EXPECT_NEAR(fe.r2, 1.0, 1e-9);
  EXPECT_EQ(fe.points, 31u);
  EXPECT_NEAR(decay_fit(t, c).rate, 0.0, 1e-12);
  c[3] = 0.0;
  EXPECT_THROW(decay_fit(t, c), NonPositiveValues);
}

TEST(Diagnostics, AlphaInvarianceFreeStreamingIsExact) {
  const FieldHistory H(ConvexDomain::ball(1.0));
  const InvarianceResult r = alpha_invariance_residual(H, 200, 7);
  EXPECT_EQ(r.samples, 200);
  EXPECT_LE(r.max_residual, 1e-8);
  EXPECT_LT(r.grazing_excluded, 200);
}

TEST(Diagnostics, AlphaInvarianceDecayingFieldConvergesWithTheIntegrator) {
  const FieldHistory H = decaying_field(0.3);
  InvarianceOptions coarse, fine;
  coarse.integrator.step = 0.02;
  fine.integrator.step = 0.005;
  const double a = alpha_invariance_residual(H, 100, 8, coarse).max_residual;
  const double b = alpha_invariance_residual(H, 100, 8, fine).max_residual;
  EXPECT_LE(b, 1e-4);
  EXPECT_LE(b, a + 1e-12);
}

TEST(Diagnostics, StabilityDistance) {
  const auto g = grids(6, 8);
  const auto f = make_f(g, [](const Vec3& x, const Vec3& v) { return x[1] * sqrt_maxwellian(v); });
  auto h = f;
  for (double& x : h.values) x += 1e-3 * sqrt_maxwellian(Vec3::Zero());
  const std::vector<PerturbationField> A{f, f}, B{f, h};
  const auto same = stability_distance(A, A, 0.5);
  ASSERT_EQ(same.size(), 2u);
  EXPECT_EQ(same[0], 0.0);
  EXPECT_EQ(same[1], 0.0);
  const auto d = stability_distance(A, B, 0.5);
  EXPECT_GT(d[1], 0.0);

  const auto other = grids(8, 8);
  const auto f2 = make_f(other, [](const Vec3&, const Vec3&) { return 0.0; });
  EXPECT_THROW(stability_distance(A, {f2, f2}, 0.5), GridMismatch);
  EXPECT_THROW(stability_distance(A, {f}, 0.5), GridMismatch);
}

TEST(Diagnostics, GrowthEnvelope) {
  std::vector<double> t, flat, expo, super;
  for (int k = 0; k <= 20; ++k) {
    const double s = 0.1 * k;
    t.push_back(s);
    flat.push_back(1.0 + 0.01 * std::sin(3 * s));
    expo.push_back(std::exp(0.4 * s));
    super.push_back(std::exp(2.0 * s * s));
  }
  const GrowthEnvelope a = growth_envelope(t, flat);
  EXPECT_FALSE(a.super_exponential);
  EXPECT_LT(a.C, 0.05);
  const GrowthEnvelope b = growth_envelope(t, expo);
  EXPECT_NEAR(b.C, 0.4, 1e-9);
  EXPECT_FALSE(b.super_exponential);
  const GrowthEnvelope c = growth_envelope(t, super);
  EXPECT_TRUE(c.super_exponential);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_LE(expo[k], std::exp(b.C * t[k]) * expo[0] * (1 + 1e-12));
}
