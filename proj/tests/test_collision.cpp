#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vpb/collision.hpp"
#include "vpb/special.hpp"

using namespace vpb;

namespace {

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> N;
  return scale * Vec3(N(rng), N(rng), N(rng));
}

// int k(v, u) du in polar coordinates centred at v, which removes the 1/|v-u| singularity
template <class K>
double kernel_integral(const K& k, const Vec3& v) {
  const auto rad = gauss_legendre(60, 0.0, 14.0);
  const auto ang = AngularQuadrature::product(24, 48);
  double s = 0.0;
  for (std::size_t i = 0; i < rad.nodes.size(); ++i)
    for (std::size_t m = 0; m < ang.directions.size(); ++m) {
      const double r = rad.nodes[i];
      s += rad.weights[i] * ang.weights[m] * r * r * k(v, v + r * ang.directions[m]);
    }
  return s;
}

}  // namespace

TEST(Collision, MaxwellianBasics) {
  EXPECT_NEAR(maxwellian(Vec3::Zero()), std::pow(2 * oracle::pi, -1.5), 1e-16);
  const VelocityGrid g(6.0, 48);
  EXPECT_NEAR(g.integrate(g.mu()), 1.0, 1e-4);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vec3 v = random_vec(rng, 2.0);
    EXPECT_DOUBLE_EQ(maxwellian(v), maxwellian(-v));
  }
}

TEST(Collision, FrequencyMatchesRadialOracle) {
  EXPECT_NEAR(collision_frequency(Vec3::Zero()) / (4 * std::sqrt(2 * oracle::pi)), 1.0, 1e-3);
  EXPECT_NEAR(collision_frequency(Vec3::Zero()) / oracle::collision_frequency(0.0), 1.0, 1e-6);
  for (double r : {0.5, 1.0, 2.5, 5.0}) EXPECT_NEAR(collision_frequency(Vec3(0, r, 0)) / oracle::collision_frequency(r), 1.0, 1e-6);
  const double r = 8.0;
  EXPECT_NEAR(collision_frequency(Vec3(r, 0, 0)) / r / (2 * oracle::pi), 1.0, 0.05);
}

TEST(Collision, FrequencyIsIsotropic) {
  std::mt19937_64 rng(2);
  const Mat3 R = Eigen::AngleAxisd(1.3, Vec3(1, -1, 2).normalized()).toRotationMatrix();
  for (int k = 0; k < 20; ++k) {
    const Vec3 v = random_vec(rng, 2.0);
    EXPECT_NEAR(collision_frequency(R * v), collision_frequency(v), 1e-8);
  }
}

TEST(Collision, EquilibriumAnnihilatesQ) {
  const VelocityGrid g(5.0, 16);
  const auto ang = AngularQuadrature::product(8, 16);
  auto mu = [](const Vec3& u) { return maxwellian(u); };
  for (const Vec3& v : {Vec3(0, 0, 0), Vec3(0.7, -0.2, 0.4), Vec3(1.5, 1.0, -0.5)}) {
    const double gain = q_gain(mu, mu, v, g, ang), loss = q_loss(mu, mu, v, g, ang);
    EXPECT_NEAR((gain - loss) / loss, 0.0, 2e-3) << v.transpose();
  }
  auto zero = [](const Vec3&) { return 0.0; };
  EXPECT_EQ(q_gain(zero, mu, Vec3(0.1, 0, 0), g, ang), 0.0);
  EXPECT_EQ(q_loss(zero, mu, Vec3(0.1, 0, 0), g, ang), 0.0);
}

TEST(Collision, CollisionInvariants) {
  const VelocityGrid g(5.0, 10);
  const auto ang = AngularQuadrature::product(6, 12);
  auto G = [](const Vec3& u) { return maxwellian(u) * (1.0 + 0.1 * u[0]); };
  double m[5] = {0, 0, 0, 0, 0}, scale = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec3 v = g.node(j);
    const double q = q_gain(G, G, v, g, ang) - q_loss(G, G, v, g, ang);
    m[0] += q;
    for (int d = 0; d < 3; ++d) m[1 + d] += v[d] * q;
    m[4] += 0.5 * (v.squaredNorm() - 3.0) * q;
    scale += (1.0 + v.squaredNorm()) * std::abs(q);
  }
  for (double x : m) EXPECT_LE(std::abs(x) / scale, 1e-3);
}

TEST(Collision, KernelSymmetryAndZeros) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Vec3 v = random_vec(rng, 1.5), u = random_vec(rng, 1.5);
    EXPECT_NEAR(kernel_k1(v, u), kernel_k1(u, v), 1e-15);
    EXPECT_NEAR(kernel_k2(v, u) / kernel_k2(u, v), 1.0, 1e-13);
  }
  EXPECT_EQ(kernel_k1(Vec3(1, 2, 3), Vec3(1, 2, 3)), 0.0);
  EXPECT_THROW(kernel_k2(Vec3(1, 0, 0), Vec3(1, 0, 0)), SingularPoint);
}

TEST(Collision, K2IntegralDecreasesWithSpeed) {
  auto k2 = [](const Vec3& v, const Vec3& u) { return kernel_k2(v, u); };
  const double a = kernel_integral(k2, Vec3::Zero());
  const double b = kernel_integral(k2, Vec3(2, 0, 0));
  const double c = kernel_integral(k2, Vec3(0, 0, 4));
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_GT(a, b);
  EXPECT_GT(b, c);
}

TEST(Collision, KRhoComparison) {
  const double theta = 0.1, rho = 0.125, rho_t = 0.07;
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 v = random_vec(rng, 2.5), u = random_vec(rng, 2.5);
    const double lhs = kernel_k_rho(v, u, rho) * std::exp(theta * (v.squaredNorm() - u.squaredNorm()));
    worst = std::max(worst, lhs / kernel_k_rho(v, u, rho_t));
  }
  EXPECT_LE(worst, 1.0 + 1e-12);
}

TEST(Collision, KRhoWeightedMomentDecays) {
  const double theta = 0.1, rho = 0.125;
  auto k = [&](const Vec3& v, const Vec3& u) {
    return kernel_k_rho(v, u, rho) * std::exp(theta * (v.squaredNorm() - u.squaredNorm()));
  };
  double prev = 0.0;
  for (double s : {0.0, 2.0, 4.0}) {
    const double m = std::sqrt(1.0 + s * s) * kernel_integral(k, Vec3(s, 0, 0));
    EXPECT_TRUE(std::isfinite(m));
    if (s > 0.0) EXPECT_LT(m, 3.0 * prev);
    prev = std::max(prev, m);
  }
}

TEST(Collision, KRhoSingularity) {
  const Vec3 v(0.5, -0.3, 0.2), d = Vec3(1, 1, 0).normalized();
  const double a = kernel_k_rho(v, v + 1e-4 * d, 0.1), b = kernel_k_rho(v, v + 1e-5 * d, 0.1);
  EXPECT_NEAR(b / a, 10.0, 1e-2);
}

TEST(Collision, NullSpaceOfLinearizedOperator) {
  const VelocityGrid g(6.0, 32);
  const LinearizedCollision L(g);
  std::vector<double> sm(g.sqrt_mu()), v1(g.size()), en(g.size()), zero(g.size(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec3 v = g.node(j);
    v1[j] = v[0] * sm[j];
    en[j] = 0.5 * (v.squaredNorm() - 3.0) * sm[j];
  }
  for (std::size_t j : {g.index(16, 16, 16), g.index(13, 19, 16), g.index(11, 16, 20), g.index(20, 12, 15)}) {
    const double nu = L.nu()[j];
    EXPECT_NEAR(L.apply_K(sm, j) / (nu * sm[j]), 1.0, 1e-2);
    EXPECT_NEAR(L.apply_K(v1, j), nu * v1[j], 1e-2 * nu * sm[j]);
    EXPECT_NEAR(L.linearized_L(sm, j), 0.0, 1e-2 * nu * sm[j]);
    EXPECT_NEAR(L.linearized_L(en, j), 0.0, 2e-2 * nu * sm[j]);
    EXPECT_EQ(L.apply_K(zero, j), 0.0);
  }
}

TEST(Collision, NullSpaceResidualShrinksUnderRefinement) {
  auto worst = [](int n) {
    const VelocityGrid g(6.0, n);
    const LinearizedCollision L(g);
    double w = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (g.node(j).norm() <= 2.5)
        w = std::max(w, std::abs(L.apply_K(g.sqrt_mu(), j) / (L.nu()[j] * g.sqrt_mu()[j]) - 1.0));
    return w;
  };
  const double a = worst(12), b = worst(24);
  EXPECT_LT(b, 0.6 * a);
}

TEST(Collision, LinearizedOperatorIsNonnegativeOffNullSpace) {
  const VelocityGrid g(5.0, 12);
  const LinearizedCollision L(g);
  std::vector<double> gf(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec3 v = g.node(j);
    // even and odd components without mass, momentum or energy
    gf[j] = (v[0] * v[1] + v[2] * (v.squaredNorm() - 5.0) * 0.2) * g.sqrt_mu()[j];
  }
  double q = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) q += gf[j] * L.linearized_L(gf, j) * g.cell_volume();
  EXPECT_GT(q, 0.0);
}

TEST(Collision, GammaMatchesDirectForm) {
  const VelocityGrid g(5.0, 12);
  const auto ang = AngularQuadrature::product(6, 12);
  auto sm = [](const Vec3& u) { return sqrt_maxwellian(u); };
  const GammaParts eq = gamma(sm, sm, Vec3(0.3, 0.1, -0.2), g, ang);
  EXPECT_NEAR((eq.gain - eq.loss) / eq.loss, 0.0, 5e-3);

  auto g1 = [](const Vec3& u) { return sqrt_maxwellian(u) * (1.0 + 0.3 * u[1]); };
  auto g2 = [](const Vec3& u) { return sqrt_maxwellian(u) * (1.0 + 0.2 * u.squaredNorm()); };
  auto F1 = [&](const Vec3& u) { return sqrt_maxwellian(u) * g1(u); };
  auto F2 = [&](const Vec3& u) { return sqrt_maxwellian(u) * g2(u); };
  for (const Vec3& v : {Vec3(0.2, 0.0, 0.1), Vec3(-0.8, 0.5, 0.3)}) {
    const GammaParts p = gamma(g1, g2, v, g, ang);
    const double direct = (q_gain(F1, F2, v, g, ang) - q_loss(F1, F2, v, g, ang)) / sqrt_maxwellian(v);
    EXPECT_NEAR(p.gain - p.loss, direct, 2e-2 * p.loss);
  }
  auto zero = [](const Vec3&) { return 0.0; };
  const GammaParts z = gamma(zero, sm, Vec3(0.1, 0, 0), g, ang);
  EXPECT_EQ(z.gain, 0.0);
  EXPECT_EQ(z.loss, 0.0);
}

TEST(Collision, CalibrationReproducesShippedConstants) {
  const KernelCalibration c = calibrate_kernel_constants(24, 8, 8);
  const KernelConstants ref = KernelConstants::calibrated();
  EXPECT_NEAR(c.constants.c_k1 / ref.c_k1, 1.0, 2e-2);
  EXPECT_NEAR(c.constants.c_k2 / ref.c_k2, 1.0, 2e-2);
  EXPECT_FALSE(c.rows.empty());
}
