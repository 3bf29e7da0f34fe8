#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "vpb/boundary.hpp"
#include "vpb/characteristics.hpp"
#include "vpb/config.hpp"
#include "vpb/field.hpp"
#include "vpb/phase.hpp"

namespace vpb {

inline constexpr double kSqrtMuFloor = 1e-30;

PerturbationField to_perturbation(const DistributionField& F, double theta = 0.1);
DistributionField from_perturbation(const PerturbationField& f);

// nu(F)(v) = int int |(v-u).omega| F(u) domega du on the velocity grid.
double nu_of_F(const VelocityGrid& grid, std::span<const double> F, const Vec3& v);

double default_time_step(const SpatialGrid& space, const VelocityGrid& velocity);

struct SolverOptions {
  bool collisions = true;
  int surface_order = 12;
  int min_substeps = 4;
  PoissonOptions poisson;
  // nodes with sup_v |F - mu| below this times sup mu keep the equilibrium collision terms
  double skip_threshold = 1e-13;
  // rescale each sweep to the mass of the step start
  bool mass_fix = true;
};

struct IterateRecord {
  double difference = 0.0;       // sup |F^{l+1} - F^l|
  double min_ratio = 0.0;        // min F / max F
  double neutral_mean = 0.0;     // Poisson source mean before projection
  double null_flux_max = 0.0;    // max wall residual after the BC update
};

struct PicardResult {
  DistributionField F;
  PotentialField phi;
  int iterations = 0;
  std::vector<IterateRecord> records;
};

class Solver {
 public:
  Solver(std::shared_ptr<const SpatialGrid> space, std::shared_ptr<const VelocityGrid> velocity,
         SolverOptions opt = {});
  ~Solver();
  Solver(const Solver&) = delete;
  Solver& operator=(const Solver&) = delete;

  const SpatialGrid& space() const;
  const VelocityGrid& velocity() const;
  const SolverOptions& options() const;
  const std::vector<SurfacePoint>& stations() const;

  // Wall amplitudes at F.time taken from F next to the wall.
  void initialize(const DistributionField& F);

  // Replaces the wall amplitudes (one per station) after initialize, e.g. when resuming from a snapshot.
  void restore_wall(std::span<const double> amplitude);

  // One Duhamel sweep with collision terms and wall data of F_prev, field phi.
  DistributionField duhamel_step(const DistributionField& F_prev, const PotentialField& phi,
                                 const DistributionField& F_start, double dt);

  // Advances F_start by dt; on success the wall state moves to the new time.
  PicardResult picard_iterate(const DistributionField& F_start, double dt, double tol, int max_iter);

  // Wall data of the last BC update: outgoing flux, incoming amplitude and
  // null-flux residual per station.
  const std::vector<double>& station_flux() const;
  const std::vector<double>& station_amplitude() const;
  const std::vector<double>& station_residual() const;
  // max over stations of |c_mu * sum W mu - 1|
  double half_space_error() const;

  // min over all iterates so far of min F / max F
  double min_positivity_ratio() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

DistributionField initial_data(std::shared_ptr<const SpatialGrid> space, std::shared_ptr<const VelocityGrid> velocity,
                               const InitSpec& init);

struct DiagRow {
  double t = 0.0;
  double mass = 0.0;
  double sup_wf = 0.0;
  double l2_f = 0.0;
  double grad_phi_sup = 0.0;
  double null_flux_max = 0.0;
  int picard_iterations = 0;
  double w1p = -1.0;  // negative when not evaluated at this step
};

struct RunOptions {
  bool write_files = true;
  bool keep_snapshots = false;  // keep f at every snapshot step in memory
  int snapshot_every = -1;      // overrides io.snapshot_every when >= 0
};

struct RunResult {
  RunConfig config;
  std::vector<DiagRow> rows;
  std::vector<PerturbationField> snapshots;
  std::shared_ptr<FieldHistory> history;
  std::unique_ptr<DistributionField> final_state;
  double dt = 0.0;
  double min_positivity_ratio = 1.0;
  double max_neutral_mean = 0.0;
  double half_space_error = 0.0;
  double max_null_flux_ratio = 0.0;  // max residual over max flux at the same update
  int max_picard_iterations = 0;
};

// Builds the grids described by a config.
std::shared_ptr<const SpatialGrid> make_spatial_grid(const RunConfig& c);
std::shared_ptr<const VelocityGrid> make_velocity_grid(const RunConfig& c);

RunResult time_march(const RunConfig& config, const RunOptions& ro = {});

}  // namespace vpb
