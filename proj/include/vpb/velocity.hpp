#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vpb/common.hpp"

namespace vpb {

// Cell-centred tensor grid on [-v_max, v_max]^3.
class VelocityGrid {
 public:
  VelocityGrid(double v_max, int n_per_axis);

  double v_max() const { return v_max_; }
  int n() const { return n_; }
  std::size_t size() const { return size_; }
  double h() const { return h_; }
  double cell_volume() const { return h_ * h_ * h_; }
  double coord(int i) const { return -v_max_ + (i + 0.5) * h_; }
  Vec3 node(std::size_t j) const;
  std::size_t index(int i0, int i1, int i2) const {
    return (static_cast<std::size_t>(i0) * n_ + i1) * n_ + i2;
  }
  void unpack(std::size_t j, int& i0, int& i1, int& i2) const;
  std::size_t mirror(std::size_t j) const;  // index of -v_j

  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& sqrt_mu() const { return sqrt_mu_; }
  const std::vector<double>& speed2() const { return speed2_; }

  double integrate(std::span<const double> values) const;

  struct Stencil {
    std::array<std::int64_t, 8> index{};
    std::array<double, 8> weight{};
    int count = 0;
  };
  // Trilinear stencil with zero extension outside the node range.
  void stencil(const Vec3& v, Stencil& s) const;
  double interpolate(std::span<const double> values, const Vec3& v) const;

  bool operator==(const VelocityGrid& o) const { return v_max_ == o.v_max_ && n_ == o.n_; }

 private:
  double v_max_;
  int n_;
  std::size_t size_;
  double h_;
  std::vector<double> mu_, sqrt_mu_, speed2_;
};

struct AngularQuadrature {
  std::vector<Vec3> directions;
  std::vector<double> weights;

  // Gauss-Legendre in cos(theta) times uniform azimuth.
  static AngularQuadrature product(int n_theta, int n_phi);
};

}  // namespace vpb
