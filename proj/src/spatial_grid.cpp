#include "vpb/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vpb/errors.hpp"
#include "vpb/parallel.hpp"
#include "vpb/special.hpp"

namespace vpb {

namespace {

// Length of [a, b] intersected with the chord of the line p + s e_axis.
double chord_overlap(const ConvexDomain& dom, Vec3 p, int axis, double a, double b) {
  Vec3 d = Vec3::Zero();
  d[axis] = 1.0;
  p[axis] = 0.0;
  const auto c = dom.chord(p, d);
  if (!c) return 0.0;
  return std::max(0.0, std::min(b, c->second) - std::max(a, c->first));
}

}  // namespace

SpatialGrid::SpatialGrid(ConvexDomain domain, int n_x, int pad)
    : domain_(std::move(domain)), n_x_(n_x), pad_(pad) {
  if (n_x < 2) throw ConfigError("n_x must be at least 2");
  dim_ = n_x_ + 2 * pad_;
  box_size_ = static_cast<std::size_t>(dim_) * dim_ * dim_;
  const Box& bb = domain_.bbox();
  h_ = (bb.hi - bb.lo) / n_x_;
  origin_ = bb.lo - (pad_ - 0.5) * h_;

  interior_index_.assign(box_size_, -1);
  for (std::size_t b = 0; b < box_size_; ++b) {
    const Vec3 x = node(b);
    if (domain_.level(x) < 0.0) {
      interior_index_[b] = static_cast<int>(interior_.size());
      interior_.push_back(b);
      interior_pos_.push_back(x);
    }
  }
  if (interior_.empty()) throw ConfigError("spatial grid has no interior nodes");

  // volume fractions and apertures; only cells near the wall need quadrature
  const QuadratureRule gl = gauss_legendre(6, 0.0, 1.0);
  vf_.assign(box_size_, 0.0);
  for (auto& a : aperture_) a.assign(box_size_, 0.0);
  const double reach = 1.8 * h_.norm();
  parallel_for(box_size_, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const Vec3 x = node(b);
      const double lv = domain_.level(x);
      const bool near = std::abs(domain_.distance_to_boundary(x)) < reach;
      if (!near) {
        const double full = lv < 0.0 ? 1.0 : 0.0;
        vf_[b] = full;
        for (int a = 0; a < 3; ++a) aperture_[a][b] = full;
        continue;
      }
      // volume: chords along axis 0 over a GL grid in axes 1, 2
      double vol = 0.0;
      const Vec3 lo = x - 0.5 * h_;
      for (std::size_t p = 0; p < gl.nodes.size(); ++p)
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
          const Vec3 pt(0.0, lo[1] + gl.nodes[p] * h_[1], lo[2] + gl.nodes[q] * h_[2]);
          vol += gl.weights[p] * gl.weights[q] * chord_overlap(domain_, pt, 0, lo[0], lo[0] + h_[0]);
        }
      vf_[b] = std::clamp(vol / h_[0], 0.0, 1.0);
      // apertures of the +axis faces
      for (int a = 0; a < 3; ++a) {
        const int t1 = (a + 1) % 3, t2 = (a + 2) % 3;
        double ap = 0.0;
        for (std::size_t p = 0; p < gl.nodes.size(); ++p) {
          Vec3 pt = x;
          pt[a] = x[a] + 0.5 * h_[a];
          pt[t2] = lo[t2] + gl.nodes[p] * h_[t2];
          ap += gl.weights[p] * chord_overlap(domain_, pt, t1, lo[t1], lo[t1] + h_[t1]);
        }
        aperture_[a][b] = std::clamp(ap / h_[t1], 0.0, 1.0);
      }
    }
  });

  // nearest interior node for the shell around Omega
  nearest_.assign(box_size_, -1);
  for (std::size_t b = 0; b < box_size_; ++b) {
    if (interior_index_[b] >= 0) {
      nearest_[b] = interior_index_[b];
      continue;
    }
    int i, j, k;
    unpack(b, i, j, k);
    const Vec3 x = node(b);
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    bool close = false;
    for (int di = -3; di <= 3; ++di)
      for (int dj = -3; dj <= 3; ++dj)
        for (int dk = -3; dk <= 3; ++dk) {
          const int a = i + di, c = j + dj, e = k + dk;
          if (a < 0 || c < 0 || e < 0 || a >= dim_ || c >= dim_ || e >= dim_) continue;
          const std::size_t nb = box_index(a, c, e);
          const int idx = interior_index_[nb];
          if (idx < 0) continue;
          if (std::max({std::abs(di), std::abs(dj), std::abs(dk)}) <= 2) close = true;
          const double d = (node(nb) - x).squaredNorm();
          if (d < best) {
            best = d;
            best_idx = idx;
          }
        }
    if (close) nearest_[b] = best_idx;
  }

  mass_weight_.assign(interior_.size(), 0.0);
  const double cv = cell_volume();
  for (std::size_t b = 0; b < box_size_; ++b) {
    if (vf_[b] <= 0.0) continue;
    int idx = interior_index_[b] >= 0 ? interior_index_[b] : nearest_[b];
    if (idx < 0) continue;
    mass_weight_[idx] += vf_[b] * cv;
  }
  volume_ = pairwise_sum(mass_weight_);
}

void SpatialGrid::unpack(std::size_t b, int& i, int& j, int& k) const {
  k = static_cast<int>(b % dim_);
  j = static_cast<int>((b / dim_) % dim_);
  i = static_cast<int>(b / (static_cast<std::size_t>(dim_) * dim_));
}

Vec3 SpatialGrid::node(std::size_t b) const {
  int i, j, k;
  unpack(b, i, j, k);
  return origin_ + Vec3(i * h_[0], j * h_[1], k * h_[2]);
}

bool SpatialGrid::same_as(const SpatialGrid& o) const {
  return n_x_ == o.n_x_ && pad_ == o.pad_ && (origin_ - o.origin_).norm() == 0.0 &&
         (h_ - o.h_).norm() == 0.0 && interior_.size() == o.interior_.size();
}

}  // namespace vpb
