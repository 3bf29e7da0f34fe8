#pragma once

#include <memory>
#include <span>
#include <vector>

#include "vpb/spatial_grid.hpp"
#include "vpb/velocity.hpp"

namespace vpb {

// F(x_i, v_j) on interior spatial nodes times velocity nodes, stored velocity-major.
class DistributionField {
 public:
  DistributionField(std::shared_ptr<const SpatialGrid> space, std::shared_ptr<const VelocityGrid> velocity,
                    double time = 0.0);

  static DistributionField maxwellian(std::shared_ptr<const SpatialGrid> space,
                                      std::shared_ptr<const VelocityGrid> velocity, double time = 0.0);

  const SpatialGrid& space() const { return *space_; }
  const VelocityGrid& velocity() const { return *velocity_; }
  const std::shared_ptr<const SpatialGrid>& space_ptr() const { return space_; }
  const std::shared_ptr<const VelocityGrid>& velocity_ptr() const { return velocity_; }

  std::size_t n_space() const { return ns_; }
  std::size_t n_velocity() const { return nv_; }
  double& at(std::size_t j, std::size_t i) { return data_[j * ns_ + i]; }
  double at(std::size_t j, std::size_t i) const { return data_[j * ns_ + i]; }
  std::span<double> plane(std::size_t j) { return {data_.data() + j * ns_, ns_}; }
  std::span<const double> plane(std::size_t j) const { return {data_.data() + j * ns_, ns_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // velocity slice at spatial node i
  std::vector<double> slice(std::size_t i) const;

  double time = 0.0;

 private:
  std::shared_ptr<const SpatialGrid> space_;
  std::shared_ptr<const VelocityGrid> velocity_;
  std::size_t ns_, nv_;
  std::vector<double> data_;
};

// f = (F - mu)/sqrt(mu) with the same layout.
struct PerturbationField {
  std::shared_ptr<const SpatialGrid> space;
  std::shared_ptr<const VelocityGrid> velocity;
  std::vector<double> values;
  double time = 0.0;
  double theta = 0.1;

  double at(std::size_t j, std::size_t i) const { return values[j * space->n_interior() + i]; }
};

}  // namespace vpb
