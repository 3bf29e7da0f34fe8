#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vpb/characteristics.hpp"
#include "vpb/phase.hpp"

namespace vpb {

// Phase-space quadrature of F with the cut-cell mass weights.
double total_mass(const DistributionField& F);

// max over the grid of e^{theta |v|^2} |f|
double weighted_sup_norm(const PerturbationField& f, double theta);
double l2_norm(const PerturbationField& f);
double lp_norm(const PerturbationField& f, double p);

// BadExponents unless 3 < p < 6 and 1 - 2/p < beta < 2/3.
void check_exponents(double beta, double p);

struct W1pOptions {
  double theta_tilde = 0.05;
  double epsilon = 0.05;
  IntegratorOptions integrator{0.02, 30};
};

struct W1pResult {
  double value = 0.0;
  std::size_t nodes = 0;
  std::size_t grazing_excluded = 0;
};

// p-norm of w_{theta~} alpha^beta |grad_{x,v} f| over interior phase nodes, one-cell differences.
W1pResult alpha_weighted_w1p_ex(const PerturbationField& f, const FieldHistory& H, double beta, double p,
                                const W1pOptions& opt = {});
double alpha_weighted_w1p(const PerturbationField& f, const FieldHistory& H, double beta, double p,
                          const W1pOptions& opt = {});

struct MacroMoments {
  double a = 0.0;
  Vec3 b = Vec3::Zero();
  double c = 0.0;
};

// Coefficients of the L2_v projection onto span{sqrt mu, v sqrt mu, (|v|^2-3)/2 sqrt mu}.
MacroMoments macroscopic_projection(const VelocityGrid& grid, std::span<const double> f);
std::vector<double> reconstruct(const VelocityGrid& grid, const MacroMoments& m);

struct DecayFit {
  double rate = 0.0;
  double r2 = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

// Least-squares slope of log(value) over the trailing `window` fraction of the series.
DecayFit decay_fit(std::span<const double> t, std::span<const double> values, double window = 0.6);

struct InvarianceOptions {
  double epsilon = 0.05;
  double t_min = 0.5, t_max = 2.0;
  double v_scale = 1.5;
  IntegratorOptions integrator;
};

struct InvarianceResult {
  double max_residual = 0.0;
  int samples = 0;
  int grazing_excluded = 0;
};

// Samples (t, x, v), moves back along the characteristic by a fraction of the
// exit time and compares alpha at both ends.
InvarianceResult alpha_invariance_residual(const FieldHistory& H, int n_samples, std::uint64_t seed,
                                           const InvarianceOptions& opt = {});

// L^{1+delta} distance between paired snapshots.
std::vector<double> stability_distance(const std::vector<PerturbationField>& a,
                                       const std::vector<PerturbationField>& b, double delta);

struct GrowthEnvelope {
  double C = 0.0;            // smallest C >= 0 with value <= e^{Ct} value_0
  double curvature = 0.0;    // quadratic coefficient of log(value/value_0)
  double curvature_se = 0.0; // its standard error
  bool super_exponential = false;
};

GrowthEnvelope growth_envelope(std::span<const double> t, std::span<const double> values);

}  // namespace vpb
