#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "vpb/geometry.hpp"

namespace vpb {

// Cell-centred Cartesian grid: n_x cells across the bounding box per axis plus
// `pad` layers on each side. Nodes whose centre lies in Omega are "interior".
class SpatialGrid {
 public:
  SpatialGrid(ConvexDomain domain, int n_x, int pad = 3);

  const ConvexDomain& domain() const { return domain_; }
  int n_x() const { return n_x_; }
  int pad() const { return pad_; }
  int dim() const { return dim_; }
  std::size_t box_size() const { return box_size_; }
  const Vec3& origin() const { return origin_; }  // centre of box node (0,0,0)
  const Vec3& h() const { return h_; }
  double h_max() const { return h_.maxCoeff(); }
  double cell_volume() const { return h_.prod(); }

  std::size_t box_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k;
  }
  void unpack(std::size_t b, int& i, int& j, int& k) const;
  Vec3 node(std::size_t b) const;

  std::size_t n_interior() const { return interior_.size(); }
  const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  int interior_index(std::size_t b) const { return interior_index_[b]; }
  const Vec3& interior_position(std::size_t i) const { return interior_pos_[i]; }

  const std::vector<double>& volume_fraction() const { return vf_; }
  // fraction of the face between node b and node b + e_axis lying in Omega
  const std::vector<double>& aperture(int axis) const { return aperture_[axis]; }
  const std::vector<double>& mass_weight() const { return mass_weight_; }
  double volume() const { return volume_; }

  // nearest interior node for non-interior nodes within two cells of Omega, else -1
  int nearest_interior(std::size_t b) const { return nearest_[b]; }

  bool same_as(const SpatialGrid& o) const;

 private:
  ConvexDomain domain_;
  int n_x_, pad_, dim_;
  std::size_t box_size_;
  Vec3 origin_, h_;
  std::vector<std::size_t> interior_;
  std::vector<int> interior_index_;
  std::vector<Vec3> interior_pos_;
  std::vector<double> vf_;
  std::array<std::vector<double>, 3> aperture_;
  std::vector<double> mass_weight_;
  double volume_ = 0.0;
  std::vector<int> nearest_;
};

}  // namespace vpb
