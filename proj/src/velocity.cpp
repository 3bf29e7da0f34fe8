#include "vpb/velocity.hpp"

#include <cmath>

#include "vpb/errors.hpp"
#include "vpb/parallel.hpp"
#include "vpb/special.hpp"

namespace vpb {

VelocityGrid::VelocityGrid(double v_max, int n_per_axis) : v_max_(v_max), n_(n_per_axis) {
  if (!(v_max > 0.0) || n_per_axis < 2) throw ConfigError("velocity grid needs v_max > 0 and n_v >= 2");
  size_ = static_cast<std::size_t>(n_) * n_ * n_;
  h_ = 2.0 * v_max_ / n_;
  mu_.resize(size_);
  sqrt_mu_.resize(size_);
  speed2_.resize(size_);
  for (std::size_t j = 0; j < size_; ++j) {
    const Vec3 v = node(j);
    speed2_[j] = v.squaredNorm();
    mu_[j] = maxwellian(v);
    sqrt_mu_[j] = sqrt_maxwellian(v);
  }
}

Vec3 VelocityGrid::node(std::size_t j) const {
  int a, b, c;
  unpack(j, a, b, c);
  return {coord(a), coord(b), coord(c)};
}

void VelocityGrid::unpack(std::size_t j, int& i0, int& i1, int& i2) const {
  i2 = static_cast<int>(j % n_);
  i1 = static_cast<int>((j / n_) % n_);
  i0 = static_cast<int>(j / (static_cast<std::size_t>(n_) * n_));
}

std::size_t VelocityGrid::mirror(std::size_t j) const {
  int a, b, c;
  unpack(j, a, b, c);
  return index(n_ - 1 - a, n_ - 1 - b, n_ - 1 - c);
}

double VelocityGrid::integrate(std::span<const double> values) const {
  return pairwise_sum(values) * cell_volume();
}

void VelocityGrid::stencil(const Vec3& v, Stencil& s) const {
  s.count = 0;
  int base[3];
  double frac[3];
  for (int d = 0; d < 3; ++d) {
    if (!(std::abs(v[d]) <= v_max_)) return;
    const double x = (v[d] + v_max_) / h_ - 0.5;
    const double fl = std::floor(x);
    base[d] = static_cast<int>(fl);
    frac[d] = x - fl;
  }
  for (int c = 0; c < 8; ++c) {
    const int i0 = base[0] + (c & 1), i1 = base[1] + ((c >> 1) & 1), i2 = base[2] + ((c >> 2) & 1);
    if (i0 < 0 || i0 >= n_ || i1 < 0 || i1 >= n_ || i2 < 0 || i2 >= n_) continue;
    const double w = ((c & 1) ? frac[0] : 1.0 - frac[0]) * (((c >> 1) & 1) ? frac[1] : 1.0 - frac[1]) *
                     (((c >> 2) & 1) ? frac[2] : 1.0 - frac[2]);
    if (w == 0.0) continue;
    s.index[s.count] = static_cast<std::int64_t>(index(i0, i1, i2));
    s.weight[s.count] = w;
    ++s.count;
  }
}

double VelocityGrid::interpolate(std::span<const double> values, const Vec3& v) const {
  Stencil s;
  stencil(v, s);
  double r = 0.0;
  for (int k = 0; k < s.count; ++k) r += s.weight[k] * values[s.index[k]];
  return r;
}

AngularQuadrature AngularQuadrature::product(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ConfigError("angular quadrature orders must be positive");
  const QuadratureRule gl = gauss_legendre(n_theta, -1.0, 1.0);
  AngularQuadrature q;
  const double dphi = kTwoPi / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double c = gl.nodes[i], s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int j = 0; j < n_phi; ++j) {
      const double ph = (j + 0.5) * dphi;
      q.directions.emplace_back(s * std::cos(ph), s * std::sin(ph), c);
      q.weights.push_back(gl.weights[i] * dphi);
    }
  }
  return q;
}

}  // namespace vpb
