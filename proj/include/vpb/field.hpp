#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "vpb/phase.hpp"
#include "vpb/spatial_grid.hpp"

namespace vpb {

struct DensityDeviation {
  std::vector<double> values;  // per interior node
  double pre_projection_mean = 0.0;
};

// Velocity quadrature of F - mu at every interior node, mean removed.
DensityDeviation density_from_f(const DistributionField& F);

struct PoissonOptions {
  double tol = 1e-11;
  int max_iter = 5000;
};

struct PoissonReport {
  int iterations = 0;
  double relative_residual = 0.0;
  std::size_t unknowns = 0;
};

class PotentialField {
 public:
  PotentialField(std::shared_ptr<const SpatialGrid> grid, std::vector<double> box_values, double time_stamp);
  static PotentialField zero(std::shared_ptr<const SpatialGrid> grid, double time_stamp = 0.0);

  const SpatialGrid& grid() const { return *grid_; }
  const std::shared_ptr<const SpatialGrid>& grid_ptr() const { return grid_; }
  const std::vector<double>& box_values() const { return values_; }
  std::vector<double> interior_values() const;
  double time_stamp() const { return time_; }
  double mean() const;

  double potential(const Vec3& x) const;
  // -grad phi of the tricubic interpolant, normal part faded out over one cell at the wall.
  // Valid anywhere in the padded box; throws OutsideDomain beyond it.
  Vec3 field(const Vec3& x) const;
  Mat3 field_gradient(const Vec3& x) const;

  // max |E| over interior nodes
  double max_field() const { return max_field_; }
  bool negligible() const { return max_field_ <= kNegligibleField; }

  PotentialField scaled(double factor, double time_stamp) const;

  static constexpr double kNegligibleField = 1e-12;

 private:
  Vec3 raw_gradient(const Vec3& x) const;
  std::shared_ptr<const SpatialGrid> grid_;
  std::vector<double> values_;
  double time_;
  double max_field_ = 0.0;
};

PotentialField solve_poisson(std::shared_ptr<const SpatialGrid> grid, const DensityDeviation& dev,
                             const PoissonOptions& opts = {}, PoissonReport* report = nullptr,
                             double time_stamp = 0.0);

// Checked evaluation: x must lie in the closure of Omega.
Vec3 eval_field(const PotentialField& phi, const Vec3& x);

PotentialField extend_negative_time(const PotentialField& phi0, double t);

// Flat little-endian float64 dump plus a text sidecar.
void write_potential_snapshot(const PotentialField& phi, const std::filesystem::path& base);

}  // namespace vpb
