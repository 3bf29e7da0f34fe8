#include "vpb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vpb/boundary.hpp"
#include "vpb/characteristics.hpp"
#include "vpb/collision.hpp"
#include "vpb/diagnostics.hpp"
#include "vpb/field.hpp"
#include "vpb/io.hpp"
#include "vpb/solver.hpp"

namespace vpb {

bool VerifyReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const VerifyRow& r) { return r.pass; });
}

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 n(g(rng), g(rng), g(rng));
  return n.normalized();
}

void add(VerifyReport& r, std::ostream& log, std::string name, double value, double threshold, bool pass,
         std::string note = {}) {
  log << (pass ? "ok   " : "FAIL ") << name << " = " << value << " (limit " << threshold << ")\n";
  r.rows.push_back({std::move(name), value, threshold, pass, std::move(note)});
}

}  // namespace

VerifyReport run_verification(const RunConfig& config, std::ostream& log) {
  VerifyReport rep;
  std::mt19937_64 rng(config.seed);
  const ConvexDomain dom = make_domain(config.domain.shape, config.domain.semi_axes);
  const VelocityGrid vg(config.grid.v_max, config.grid.n_v);

  const ConvexityReport conv = check_convexity(dom, 32);
  add(rep, log, "convexity_margin", conv.min_curvature_margin, 0.0, conv.min_curvature_margin > 0.0);

  double id_err = 0.0, fixed_err = 0.0, nf = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vec3 n = random_unit(rng);
    id_err = std::max(id_err, std::abs(c_mu_identity(vg, n) - 1.0));
    const double fl = outgoing_flux(vg, vg.mu(), n);
    for (std::size_t j = 0; j < vg.size(); j += 7) {
      const Vec3 v = vg.node(j);
      if (n.dot(v) >= 0.0) continue;
      fixed_err = std::max(fixed_err, std::abs(apply_diffuse_bc(fl, v, n) / vg.mu()[j] - 1.0));
    }
    nf = std::max(nf, std::abs(null_flux_residual(vg, vg.mu(), n)));
  }
  add(rep, log, "c_mu_identity", id_err, 1e-4, id_err <= 1e-4);
  add(rep, log, "maxwellian_bc_fixed_point", fixed_err, 1e-4, fixed_err <= 1e-4);
  add(rep, log, "null_flux_maxwellian", nf, 2.0 * id_err / c_mu() + 1e-14, nf <= 2.0 * id_err / c_mu() + 1e-14);

  {
    const VelocityGrid cg(5.0, 10);
    const AngularQuadrature ang = AngularQuadrature::product(6, 12);
    const Vec3 c(0.3, -0.2, 0.1);
    auto G = [&](const Vec3& u) { return maxwellian(u) + 0.3 * std::exp(-(u - c).squaredNorm()); };
    std::vector<double> Q(cg.size());
    for (std::size_t j = 0; j < cg.size(); ++j) {
      const Vec3 v = cg.node(j);
      Q[j] = q_gain(G, G, v, cg, ang) - q_loss(G, G, v, cg, ang);
    }
    double m[5] = {0, 0, 0, 0, 0}, scale = 0.0;
    for (std::size_t j = 0; j < cg.size(); ++j) {
      const Vec3 v = cg.node(j);
      m[0] += Q[j];
      for (int a = 0; a < 3; ++a) m[1 + a] += v[a] * Q[j];
      m[4] += v.squaredNorm() * Q[j];
      scale += (1.0 + v.squaredNorm()) * std::abs(Q[j]);
    }
    double worst = 0.0;
    for (double x : m) worst = std::max(worst, std::abs(x) / scale);
    add(rep, log, "collision_invariance", worst, 1e-3, worst <= 1e-3);
  }

  {
    auto E = [](double t, const Vec3& x) {
      const double a = 0.3 * std::exp(-std::abs(t));
      return Vec3(-a * x[0], 0.5 * a * x[1], 0.2 * a);
    };
    auto dE = [](double t, const Vec3&) {
      Mat3 m = Mat3::Zero();
      m(0, 0) = -0.3 * std::exp(-std::abs(t));
      m(1, 1) = 0.15 * std::exp(-std::abs(t));
      return m;
    };
    const FieldHistory H = FieldHistory::analytic(dom, E, dE);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Vec3 x = 0.3 * random_unit(rng);
      const Vec3 v = random_unit(rng);
      const VariationalResult r = variational_jacobian({1.0, x, v}, H, 1.2, {0.002, 40});
      worst = std::max(worst, std::abs(r.jacobian.determinant() - 1.0));
    }
    add(rep, log, "liouville_determinant", worst, 1e-5, worst <= 1e-5);
  }

  const FieldHistory free = FieldHistory::analytic(dom, [](double, const Vec3&) { return Vec3::Zero(); },
                                                   [](double, const Vec3&) { return Mat3::Zero(); });
  {
    double worst = 0.0;
    int used = 0;
    for (int k = 0; k < 200 && used < 20; ++k) {
      const Vec3 x = 0.5 * random_unit(rng);
      const Vec3 v = random_unit(rng) * 1.2;
      const ExitMapJacobian j = exit_map_jacobian({0.0, x, v}, free);
      if (!j.exit.hit || std::abs(normal(dom, j.exit.x_b).dot(j.exit.v_b)) < 0.1) continue;
      worst = std::max(worst, std::abs(j.fd / j.analytic - 1.0));
      ++used;
    }
    add(rep, log, "exit_map_jacobian", worst, 0.01, worst <= 0.01);
  }
  {
    const InvarianceResult r = alpha_invariance_residual(free, 200, config.seed);
    add(rep, log, "alpha_invariance_free", r.max_residual, 1e-8, r.max_residual <= 1e-8);
  }

  {
    RunConfig small = config;
    small.grid.n_x = 8;
    small.grid.n_v = 12;
    small.grid.v_max = 5.0;
    small.grid.surface_order = 6;
    small.init = InitSpec{};
    small.march.t_end = 0.0;
    auto space = make_spatial_grid(small);
    auto vel = make_velocity_grid(small);
    DistributionField F = initial_data(space, vel, small.init);
    std::vector<double> g(F.data().size());
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (std::size_t k = 0; k < g.size(); ++k) F.data()[k] *= u(rng);
    const DistributionField back = from_perturbation(to_perturbation(F));
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k)
      worst = std::max(worst, std::abs(back.data()[k] - F.data()[k]));
    add(rep, log, "perturbation_round_trip", worst, 1e-12, worst <= 1e-12);

    const PerturbationField f = to_perturbation(F);
    std::vector<double> col(vel->size());
    for (std::size_t j = 0; j < vel->size(); ++j) col[j] = f.at(j, 0);
    const std::vector<double> p1 = reconstruct(*vel, macroscopic_projection(*vel, col));
    const std::vector<double> p2 = reconstruct(*vel, macroscopic_projection(*vel, p1));
    double idem = 0.0;
    for (std::size_t j = 0; j < p1.size(); ++j) idem = std::max(idem, std::abs(p1[j] - p2[j]));
    add(rep, log, "projection_idempotent", idem, 1e-10, idem <= 1e-10);
  }

  {
    RunConfig eq = config;
    eq.grid.n_x = 8;
    eq.grid.n_v = 12;
    eq.grid.v_max = 5.0;
    eq.grid.surface_order = 6;
    eq.init = InitSpec{};
    eq.io.w1p_every = 0;
    eq.io.snapshot_every = 0;
    const RunResult probe = time_march([&] { RunConfig c = eq; c.march.t_end = 0.0; return c; }(), {false});
    eq.march.t_end = 5 * probe.dt;
    const RunResult run = time_march(eq, {false});
    const auto space = make_spatial_grid(eq);
    const auto vel = make_velocity_grid(eq);
    const DistributionField& F = *run.final_state;
    double dev = 0.0;
    const double mu_max = *std::max_element(vel->mu().begin(), vel->mu().end());
    for (std::size_t j = 0; j < F.n_velocity(); ++j)
      for (std::size_t i = 0; i < F.n_space(); ++i) dev = std::max(dev, std::abs(F.at(j, i) - vel->mu()[j]));
    add(rep, log, "equilibrium_drift", dev / mu_max, 1e-3, dev / mu_max <= 1e-3);
    const double drift = std::abs(run.rows.back().mass - run.rows.front().mass) / run.rows.front().mass;
    add(rep, log, "equilibrium_mass_drift", drift, 1e-4, drift <= 1e-4);
    add(rep, log, "positivity_ratio", run.min_positivity_ratio, -1e-12, run.min_positivity_ratio >= -1e-12);
  }

  {
    CycleOptions opt;
    opt.importance = true;
    double prev = 2.0;
    bool mono = true;
    for (int k : {1, 2, 3, 5}) {
      const CycleTail t = cycle_tail_mass(0.3 * random_unit(rng), random_unit(rng), 2.0, free, k, 2000, config.seed, opt);
      rep.cycle_table.push_back({std::to_string(k), format_double(t.mass), format_double(t.std_error),
                                 format_double(t.weighted_mass), format_double(t.weighted_std_error)});
      if (t.mass > prev + 3 * t.std_error) mono = false;
      prev = t.mass;
    }
    add(rep, log, "cycle_tail_monotone", mono ? 1.0 : 0.0, 1.0, mono);
  }

  {
    auto grid = std::make_shared<const SpatialGrid>(ConvexDomain::ball(1.0), 16);
    DensityDeviation dev;
    dev.values.resize(grid->n_interior());
    for (std::size_t i = 0; i < dev.values.size(); ++i) {
      const double r2 = grid->interior_position(i).squaredNorm();
      dev.values[i] = 5.0 * r2 - 3.0;
    }
    const PotentialField phi = solve_poisson(grid, dev);
    double err = 0.0, ref = 0.0, mean = 0.0, vol = 0.0;
    for (std::size_t i = 0; i < dev.values.size(); ++i) {
      const double r2 = grid->interior_position(i).squaredNorm();
      const double w = grid->mass_weight()[i];
      mean += w * (0.5 * r2 - 0.25 * r2 * r2);
      vol += w;
    }
    mean /= vol;
    const auto vals = phi.interior_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double r2 = grid->interior_position(i).squaredNorm();
      const double ex = 0.5 * r2 - 0.25 * r2 * r2 - mean;
      err = std::max(err, std::abs(vals[i] - ex));
      ref = std::max(ref, std::abs(ex));
    }
    add(rep, log, "poisson_radial", err / ref, 0.05, err / ref <= 0.05);
  }
  return rep;
}

void write_verify_report(const VerifyReport& r, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& x : r.rows)
    rows.push_back({x.name, format_double(x.value), format_double(x.threshold), x.pass ? "pass" : "fail", x.note});
  write_csv(path, {"check", "value", "threshold", "status", "note"}, rows);
}

}  // namespace vpb
