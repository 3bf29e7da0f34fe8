#pragma once

#include <random>
#include <span>
#include <vector>

#include "vpb/characteristics.hpp"
#include "vpb/geometry.hpp"
#include "vpb/velocity.hpp"

namespace vpb {

double c_mu();

double outgoing_flux(const VelocityGrid& grid, std::span<const double> F, const Vec3& n);

// c_mu * int_{n.u>0} mu (n.u) du by the half-space quadrature
double c_mu_identity(const VelocityGrid& grid, const Vec3& n);

double apply_diffuse_bc(double flux, const Vec3& v, const Vec3& n);

// out-flux minus in-flux at a wall point, both by half-space quadrature
double null_flux_residual(const VelocityGrid& grid, std::span<const double> F, const Vec3& n);

Vec3 sample_sigma(const Vec3& n, std::mt19937_64& rng);
inline Vec3 sample_sigma(const SurfacePoint& x, std::mt19937_64& rng) { return sample_sigma(x.normal, rng); }

// Density of d sigma = c_mu mu(v) (n.v) dv on the half space.
double sigma_density(const Vec3& n, const Vec3& v);

// Outgoing flux per surface node at stored times; linear in time, inverse
// distance over the three nearest nodes in space.
class BoundaryFluxTable {
 public:
  explicit BoundaryFluxTable(std::vector<SurfacePoint> nodes);

  const std::vector<SurfacePoint>& nodes() const { return nodes_; }
  void add(double t, std::vector<double> values);
  void clear() { times_.clear(), values_.clear(); }
  std::size_t n_times() const { return times_.size(); }
  double time(std::size_t k) const { return times_[k]; }
  const std::vector<double>& values(std::size_t k) const { return values_[k]; }

  double flux(double t, const Vec3& x) const;

  struct SpatialWeights {
    int index[3];
    double weight[3];
  };
  SpatialWeights spatial_weights(const Vec3& x) const;

 private:
  std::vector<SurfacePoint> nodes_;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
};

// Isotropic collision frequency table for cycle damping.
double collision_frequency_fast(double speed);

struct CycleNode {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct CycleOptions {
  bool importance = false;  // sample bounces from the mixture proposal
  double defensive = 0.2;   // share of d sigma in the mixture
  double kappa = 1.0;
  double scale_cap = 0.5;
  bool damping = false;     // multiply by exp(-int nu) on traced legs
  double theta = 0.1;       // weight exponent of w tilde on the last leg
  int max_resample = 100;
};

struct StochasticCycle {
  int k = 0;
  std::vector<CycleNode> nodes;
  double log_weight = 0.0;   // log of d sigma / proposal over the sampled legs
  double log_damping = 0.0;  // log of the exponential nu factors
  double w_tilde_last = 1.0; // w tilde at the last sampled velocity
  bool alive = false;        // t_k > 0
  bool degenerate = false;
  int grazing_resamples = 0;

  double weight() const { return std::exp(log_weight); }
};

StochasticCycle stochastic_cycle(const PhasePoint& p, const FieldHistory& H, int k, std::mt19937_64& rng,
                                 const CycleOptions& opt = {});

struct CycleTail {
  double mass = 0.0;
  double std_error = 0.0;
  double weighted_mass = 0.0;   // includes nu damping and w tilde on the last leg
  double weighted_std_error = 0.0;
  int degenerate = 0;
  int samples = 0;
};

// Estimate of the measure of cycles with t_k > 0. Uses per-sample rng streams
// (seed + sample index) so the result does not depend on the thread count.
CycleTail cycle_tail_mass(const Vec3& x, const Vec3& v, double t, const FieldHistory& H, int k, int n_samples,
                          std::uint64_t seed, const CycleOptions& opt = {});

}  // namespace vpb
