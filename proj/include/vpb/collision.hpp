#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vpb/common.hpp"
#include "vpb/errors.hpp"
#include "vpb/velocity.hpp"

namespace vpb {

struct KernelConstants {
  double c_k1 = 0.0;
  double c_k2 = 0.0;
  // Values produced by calibrate_kernel_constants, shipped as constants.
  static KernelConstants calibrated() { return {0.3989422804014327, 1.5957691216057308}; }
};

using VelocityFunction = std::function<double(const Vec3&)>;

// Exact nu(v) = 2 pi int |v-u| mu(u) du evaluated by a fine 2-D quadrature.
double collision_frequency(const Vec3& v);

// Same quantity as a table on the grid nodes (used for the grid operators).
std::vector<double> collision_frequency_table(const VelocityGrid& grid);

// Wraps grid samples as an interpolating velocity function.
inline auto grid_function(const VelocityGrid& grid, std::span<const double> values) {
  return [&grid, values](const Vec3& v) { return grid.interpolate(values, v); };
}

template <class F1, class F2>
double q_gain(const F1& f1, const F2& f2, const Vec3& v, const VelocityGrid& grid,
              const AngularQuadrature& ang) {
  const std::size_t nv = grid.size();
  double total = 0.0;
  for (std::size_t k = 0; k < nv; ++k) {
    const Vec3 u = grid.node(k);
    const Vec3 w = u - v;
    double acc = 0.0;
    for (std::size_t m = 0; m < ang.directions.size(); ++m) {
      const Vec3& om = ang.directions[m];
      const double c = w.dot(om);
      if (c == 0.0) continue;
      const Vec3 up = u - c * om;
      const Vec3 vp = v + c * om;
      const double e_before = u.squaredNorm() + v.squaredNorm();
      if (std::abs(up.squaredNorm() + vp.squaredNorm() - e_before) > 1e-10 * (1.0 + e_before))
        throw GridTooCoarse("post-collision velocities break energy conservation");
      acc += ang.weights[m] * std::abs(c) * f1(up) * f2(vp);
    }
    total += acc;
  }
  return total * grid.cell_volume();
}

template <class F1, class F2>
double q_loss(const F1& f1, const F2& f2, const Vec3& v, const VelocityGrid& grid,
              const AngularQuadrature& ang) {
  const double f2v = f2(v);
  if (f2v == 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec3 u = grid.node(k);
    const double f1u = f1(u);
    if (f1u == 0.0) continue;
    const Vec3 w = v - u;
    double acc = 0.0;
    for (std::size_t m = 0; m < ang.directions.size(); ++m)
      acc += ang.weights[m] * std::abs(w.dot(ang.directions[m]));
    total += acc * f1u;
  }
  return total * f2v * grid.cell_volume();
}

struct GammaParts {
  double gain = 0.0;
  double loss = 0.0;
};

// Carleman form with relative velocity u = w - v running over grid nodes w.
template <class G1, class G2>
GammaParts gamma(const G1& g1, const G2& g2, const Vec3& v, const VelocityGrid& grid,
                 const AngularQuadrature& ang) {
  GammaParts r;
  const double g2v = g2(v);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec3 w = grid.node(k);
    const Vec3 u = w - v;
    const double sm = sqrt_maxwellian(w);
    double gain = 0.0, abs_sum = 0.0;
    for (std::size_t m = 0; m < ang.directions.size(); ++m) {
      const Vec3& om = ang.directions[m];
      const double c = u.dot(om);
      const double a = ang.weights[m] * std::abs(c);
      const Vec3 upar = c * om;
      gain += a * g1(v + (u - upar)) * g2(v + upar);
      abs_sum += a;
    }
    r.gain += gain * sm;
    r.loss += abs_sum * g1(w) * sm;
  }
  r.gain *= grid.cell_volume();
  r.loss *= grid.cell_volume() * g2v;
  return r;
}

double kernel_k1(const Vec3& v, const Vec3& u, const KernelConstants& kc = KernelConstants::calibrated());
double kernel_k2(const Vec3& v, const Vec3& u, const KernelConstants& kc = KernelConstants::calibrated());
double kernel_k_rho(const Vec3& v, const Vec3& u, double rho);

// int over a cube of side 1 centred at the origin of 1/|x|
inline constexpr double kUnitCubeInverseDistance = 2.3800772454133;

// Linear operators on grid functions.
class LinearizedCollision {
 public:
  LinearizedCollision(const VelocityGrid& grid, KernelConstants kc = KernelConstants::calibrated());

  const VelocityGrid& grid() const { return grid_; }
  const KernelConstants& constants() const { return kc_; }
  const std::vector<double>& nu() const { return nu_; }

  // (K g)(v_j) for a grid node j; the k2 cell at u = v uses the integrated local model.
  double apply_K(std::span<const double> g, std::size_t j) const;
  double apply_K2(std::span<const double> g, std::size_t j) const;
  double apply_K1(std::span<const double> g, std::size_t j) const;
  double linearized_L(std::span<const double> g, std::size_t j) const;

  // principal cell weight for k2 at node v (includes c_k2)
  double principal_cell(const Vec3& v) const;

  // Dense matrix of apply_K2, row j acting on grid samples.
  Eigen::MatrixXd k2_matrix() const;

 private:
  VelocityGrid grid_;
  KernelConstants kc_;
  std::vector<double> nu_;
};

struct CalibrationRow {
  std::string test_function;
  Vec3 v;
  double direct_k1 = 0.0, kernel_k1 = 0.0;
  double direct_k2 = 0.0, kernel_k2 = 0.0;
};

struct KernelCalibration {
  KernelConstants constants;
  std::vector<CalibrationRow> rows;
  double max_rel_dev_k1 = 0.0;
  double max_rel_dev_k2 = 0.0;
};

// Least-squares fit of the kernel forms against the direct collision integrals
// for Gaussian test functions. Resolution controls the cost.
KernelCalibration calibrate_kernel_constants(int n_radial = 48, int n_dir = 16, int n_omega = 16);

}  // namespace vpb
