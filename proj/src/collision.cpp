#include "vpb/collision.hpp"

#include <algorithm>
#include <cmath>

#include "vpb/parallel.hpp"
#include "vpb/special.hpp"

namespace vpb {

double collision_frequency(const Vec3& v) {
  // 2 pi * int_0^inf r^2 * 2 pi N (e^{-(r-s)^2/2} - e^{-(r+s)^2/2}) / s dr, angular part done exactly
  const double s = v.norm();
  const double upper = s + 14.0;
  const int panels = 12;
  static const QuadratureRule gl = gauss_legendre(20, 0.0, 1.0);
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = upper * p / panels, len = upper / panels;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double r = a + len * gl.nodes[i];
      double ang;
      if (r * s < 1e-8)
        ang = 2.0 * std::exp(-0.5 * r * r) * (1.0 + r * r * s * s / 6.0);
      else
        ang = (std::exp(-0.5 * (r - s) * (r - s)) - std::exp(-0.5 * (r + s) * (r + s))) / (r * s);
      total += gl.weights[i] * len * r * r * r * ang;
    }
  }
  return kTwoPi * kTwoPi * kMaxwellNorm * total;
}

std::vector<double> collision_frequency_table(const VelocityGrid& grid) {
  std::vector<double> nu(grid.size());
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) nu[j] = collision_frequency(grid.node(j));
  });
  return nu;
}

double kernel_k1(const Vec3& v, const Vec3& u, const KernelConstants& kc) {
  return kc.c_k1 * (v - u).norm() * std::exp(-0.25 * (v.squaredNorm() + u.squaredNorm()));
}

double kernel_k2(const Vec3& v, const Vec3& u, const KernelConstants& kc) {
  const double r2 = (v - u).squaredNorm();
  if (r2 < 1e-300) throw SingularPoint("k2 is singular at u = v");
  const double a = v.squaredNorm() - u.squaredNorm();
  return kc.c_k2 / std::sqrt(r2) * std::exp(-r2 / 8.0 - a * a / (8.0 * r2));
}

double kernel_k_rho(const Vec3& v, const Vec3& u, double rho) {
  const double r2 = (v - u).squaredNorm();
  if (r2 < 1e-300) throw SingularPoint("k_rho is singular at u = v");
  const double a = v.squaredNorm() - u.squaredNorm();
  return std::exp(-rho * r2 - rho * a * a / r2) / std::sqrt(r2);
}

LinearizedCollision::LinearizedCollision(const VelocityGrid& grid, KernelConstants kc)
    : grid_(grid), kc_(kc), nu_(collision_frequency_table(grid)) {}

double LinearizedCollision::principal_cell(const Vec3& v) const {
  const double s = v.norm();
  const double avg = s > 1e-8 ? std::sqrt(kPi / 2.0) * std::erf(s / std::sqrt(2.0)) / s : 1.0;
  const double h = grid_.h();
  return kc_.c_k2 * kUnitCubeInverseDistance * h * h * avg;
}

double LinearizedCollision::apply_K1(std::span<const double> g, std::size_t j) const {
  const Vec3 v = grid_.node(j);
  double s = 0.0;
  for (std::size_t k = 0; k < grid_.size(); ++k)
    if (g[k] != 0.0) s += kernel_k1(v, grid_.node(k), kc_) * g[k];
  return s * grid_.cell_volume();
}

double LinearizedCollision::apply_K2(std::span<const double> g, std::size_t j) const {
  const Vec3 v = grid_.node(j);
  double s = 0.0;
  for (std::size_t k = 0; k < grid_.size(); ++k)
    if (k != j && g[k] != 0.0) s += kernel_k2(v, grid_.node(k), kc_) * g[k];
  return s * grid_.cell_volume() + principal_cell(v) * g[j];
}

Eigen::MatrixXd LinearizedCollision::k2_matrix() const {
  const std::size_t n = grid_.size();
  Eigen::MatrixXd m(n, n);
  const double dv = grid_.cell_volume();
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const Vec3 v = grid_.node(j);
      for (std::size_t k = 0; k < n; ++k) m(j, k) = k == j ? principal_cell(v) : kernel_k2(v, grid_.node(k), kc_) * dv;
    }
  });
  return m;
}

double LinearizedCollision::apply_K(std::span<const double> g, std::size_t j) const {
  return apply_K2(g, j) - apply_K1(g, j);
}

double LinearizedCollision::linearized_L(std::span<const double> g, std::size_t j) const {
  return nu_[j] * g[j] - apply_K(g, j);
}

namespace {

struct SphericalRule {
  std::vector<Vec3> w;
  std::vector<double> weight;
};

SphericalRule spherical_rule(int n_radial, int n_dir, double radius) {
  const int panels = 4;
  const QuadratureRule gl = gauss_legendre(std::max(1, n_radial / panels), 0.0, 1.0);
  const AngularQuadrature dirs = AngularQuadrature::product(n_dir, 2 * n_dir);
  SphericalRule r;
  for (int p = 0; p < panels; ++p) {
    const double a = radius * p / panels, len = radius / panels;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double rr = a + len * gl.nodes[i];
      for (std::size_t d = 0; d < dirs.directions.size(); ++d) {
        r.w.push_back(rr * dirs.directions[d]);
        r.weight.push_back(gl.weights[i] * len * rr * rr * dirs.weights[d]);
      }
    }
  }
  return r;
}

}  // namespace

KernelCalibration calibrate_kernel_constants(int n_radial, int n_dir, int n_omega) {
  const SphericalRule sr = spherical_rule(n_radial, n_dir, 14.0);
  const AngularQuadrature om = AngularQuadrature::product(n_omega, 2 * n_omega);
  const Vec3 c(0.5, -0.3, 0.2);
  const std::vector<std::pair<std::string, VelocityFunction>> tests = {
      {"sqrt_mu", [](const Vec3& u) { return sqrt_maxwellian(u); }},
      {"gaussian", [c](const Vec3& u) { return std::exp(-(u - c).squaredNorm() / 3.0); }},
  };
  const std::vector<Vec3> vs = {Vec3(0, 0, 0), Vec3(1.0, 0.5, 0.0), Vec3(2.5, 0.0, 1.0)};

  KernelCalibration cal;
  for (const auto& t : tests)
    for (const auto& v : vs) cal.rows.push_back({t.first, v});

  parallel_for(cal.rows.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      CalibrationRow& row = cal.rows[i];
      const VelocityFunction& g = tests[i / vs.size()].second;
      const Vec3 v = row.v;
      const double smv = sqrt_maxwellian(v);
      const double v2 = v.squaredNorm();
      double d1 = 0, k1 = 0, d2 = 0, k2 = 0;
      for (std::size_t q = 0; q < sr.w.size(); ++q) {
        const Vec3& w = sr.w[q];
        const double W = sr.weight[q];
        const Vec3 u = v + w;
        const double r = w.norm();
        if (r == 0.0) continue;
        const double gu = g(u);
        double om_abs = 0.0, gain = 0.0;
        for (std::size_t m = 0; m < om.directions.size(); ++m) {
          const double cc = w.dot(om.directions[m]);
          const double a = om.weights[m] * std::abs(cc);
          om_abs += a;
          const Vec3 vpar = v + cc * om.directions[m];
          const Vec3 vperp = u - cc * om.directions[m];
          gain += a * (maxwellian(vperp) * sqrt_maxwellian(vpar) * g(vpar) +
                       sqrt_maxwellian(vperp) * g(vperp) * maxwellian(vpar));
        }
        d1 += W * om_abs * sqrt_maxwellian(u) * gu;
        k1 += W * r * std::exp(-0.25 * (v2 + u.squaredNorm())) * gu;
        d2 += W * gain;
        const double a = v2 - u.squaredNorm();
        k2 += W / r * std::exp(-r * r / 8.0 - a * a / (8.0 * r * r)) * gu;
      }
      row.direct_k1 = d1 * smv;
      row.kernel_k1 = k1;
      row.direct_k2 = d2 / smv;
      row.kernel_k2 = k2;
    }
  });

  double n1 = 0, m1 = 0, n2 = 0, m2 = 0;
  for (const auto& r : cal.rows) {
    n1 += r.direct_k1 * r.kernel_k1;
    m1 += r.kernel_k1 * r.kernel_k1;
    n2 += r.direct_k2 * r.kernel_k2;
    m2 += r.kernel_k2 * r.kernel_k2;
  }
  cal.constants = {n1 / m1, n2 / m2};
  for (const auto& r : cal.rows) {
    cal.max_rel_dev_k1 =
        std::max(cal.max_rel_dev_k1, std::abs(r.direct_k1 / (cal.constants.c_k1 * r.kernel_k1) - 1.0));
    cal.max_rel_dev_k2 =
        std::max(cal.max_rel_dev_k2, std::abs(r.direct_k2 / (cal.constants.c_k2 * r.kernel_k2) - 1.0));
  }
  return cal;
}

}  // namespace vpb
