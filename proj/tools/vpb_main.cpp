#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "vpb/boundary.hpp"
#include "vpb/characteristics.hpp"
#include "vpb/collision.hpp"
#include "vpb/config.hpp"
#include "vpb/errors.hpp"
#include "vpb/io.hpp"
#include "vpb/parallel.hpp"
#include "vpb/solver.hpp"
#include "vpb/verify.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "YAML run configuration");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

vpb::RunConfig load(const Common& c) {
  vpb::RunConfig cfg = c.config.empty() ? vpb::RunConfig{} : vpb::parse_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.io.out_dir = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  vpb::validate_config(cfg);
  vpb::set_thread_count(cfg.threads);
  return cfg;
}

vpb::Vec3 parse_vec(const std::string& s) {
  std::stringstream ss(s);
  vpb::Vec3 v;
  char sep;
  if (!(ss >> v[0] >> sep >> v[1] >> sep >> v[2])) throw vpb::ParseError("expected three comma-separated numbers: " + s);
  return v;
}

int simulate(const Common& c, std::optional<double> t_end) {
  vpb::RunConfig cfg = load(c);
  if (t_end) cfg.march.t_end = *t_end;
  vpb::validate_config(cfg);
  const vpb::RunResult run = vpb::time_march(cfg);
  const auto& last = run.rows.back();
  std::cout << "steps " << run.rows.size() - 1 << ", dt " << run.dt << ", t " << last.t << "\n";
  std::cout << "mass " << run.rows.front().mass << " -> " << last.mass << "\n";
  std::cout << "sup |w f| " << last.sup_wf << ", sup |grad phi| " << last.grad_phi_sup << "\n";
  std::cout << "outputs in " << cfg.io.out_dir << "\n";
  return 0;
}

int verify(const Common& c) {
  const vpb::RunConfig cfg = load(c);
  std::filesystem::create_directories(cfg.io.out_dir);
  const vpb::VerifyReport rep = vpb::run_verification(cfg, std::cerr);
  std::cout << "check,value,threshold,status\n";
  for (const auto& r : rep.rows)
    std::cout << r.name << "," << vpb::format_double(r.value) << "," << vpb::format_double(r.threshold) << ","
              << (r.pass ? "pass" : "fail") << "\n";
  std::cout << "\nk,tail_mass,std_error,weighted_tail_mass,weighted_std_error\n";
  for (const auto& row : rep.cycle_table) {
    for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << row[i];
    std::cout << "\n";
  }
  vpb::write_verify_report(rep, std::filesystem::path(cfg.io.out_dir) / "verify_report.csv");
  return rep.all_pass() ? 0 : kExitVerification;
}

int trace_cmd(const Common& c, const std::string& xs, const std::string& vs, double t, int steps) {
  const vpb::RunConfig cfg = load(c);
  auto space = vpb::make_spatial_grid(cfg);
  auto vel = vpb::make_velocity_grid(cfg);
  const vpb::DistributionField F = vpb::initial_data(space, vel, cfg.init);
  vpb::FieldHistory H(space->domain());
  H.push(std::make_shared<const vpb::PotentialField>(vpb::solve_poisson(space, vpb::density_from_f(F))));
  const vpb::PhasePoint p{t, parse_vec(xs), parse_vec(vs)};
  if (!space->domain().contains(p.x)) throw vpb::OutsideDomain("trace start point is not inside the domain");
  const vpb::BackwardExit be = vpb::backward_exit(p, H, std::max(t, 0.0) + 10.0);
  const double len = be.t_b;
  const vpb::WeightParams wp{cfg.physics.epsilon};

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (c.out) {
    std::filesystem::create_directories(*c.out);
    file.open(std::filesystem::path(*c.out) / "trace.csv");
    out = &file;
  }
  *out << "s,x0,x1,x2,v0,v1,v2,xi,alpha\n";
  vpb::PhasePoint cur = p;
  for (int k = 0; k <= steps; ++k) {
    const double s = len * k / steps;
    if (k == steps) {
      cur = {t - len, be.x_b, be.v_b};
    } else if (k > 0) {
      cur = vpb::trace(cur, H, t - s);
    }
    const double a = vpb::kinetic_weight(cur, H, wp);
    *out << vpb::format_double(s) << "," << vpb::format_double(cur.x[0]) << "," << vpb::format_double(cur.x[1]) << ","
         << vpb::format_double(cur.x[2]) << "," << vpb::format_double(cur.v[0]) << "," << vpb::format_double(cur.v[1])
         << "," << vpb::format_double(cur.v[2]) << "," << vpb::format_double(space->domain().level(cur.x)) << ","
         << vpb::format_double(a) << "\n";
  }
  return 0;
}

int calibrate(const Common& c, int n_radial, int n_dir, int n_omega) {
  const vpb::RunConfig cfg = load(c);
  const vpb::KernelCalibration cal = vpb::calibrate_kernel_constants(n_radial, n_dir, n_omega);
  std::filesystem::create_directories(cfg.io.out_dir);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : cal.rows)
    rows.push_back({r.test_function, vpb::format_double(r.v[0]), vpb::format_double(r.v[1]), vpb::format_double(r.v[2]),
                    vpb::format_double(r.direct_k1), vpb::format_double(r.kernel_k1), vpb::format_double(r.direct_k2),
                    vpb::format_double(r.kernel_k2)});
  const auto dir = std::filesystem::path(cfg.io.out_dir);
  vpb::write_csv(dir / "kernel_fit.csv",
                 {"test_function", "v0", "v1", "v2", "direct_k1", "kernel_k1", "direct_k2", "kernel_k2"}, rows);
  std::ofstream(dir / "kernel_constants.yaml") << "c_k1: " << vpb::format_double(cal.constants.c_k1) << "\n"
                                               << "c_k2: " << vpb::format_double(cal.constants.c_k2) << "\n"
                                               << "max_rel_dev_k1: " << vpb::format_double(cal.max_rel_dev_k1) << "\n"
                                               << "max_rel_dev_k2: " << vpb::format_double(cal.max_rel_dev_k2) << "\n";
  std::cout << "c_k1 " << vpb::format_double(cal.constants.c_k1) << " (max rel dev " << cal.max_rel_dev_k1 << ")\n";
  std::cout << "c_k2 " << vpb::format_double(cal.constants.c_k2) << " (max rel dev " << cal.max_rel_dev_k2 << ")\n";
  return 0;
}

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << std::string(2 * depth, ' ') << "error: " << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vlasov-Poisson-Boltzmann simulator with diffuse reflection"};
  app.require_subcommand(1);

  Common sim_c, ver_c, tr_c, cal_c;
  std::optional<double> t_end;
  auto* sim = app.add_subcommand("simulate", "run the time marcher and write diag.csv and snapshots");
  add_common(sim, sim_c);
  sim->add_option("--t-end", t_end, "override the final time");

  auto* ver = app.add_subcommand("verify", "run the invariant battery and write verify_report.csv");
  add_common(ver, ver_c);

  std::string xs = "0,0,0", vs = "1,0,0";
  double t0 = 1.0;
  int steps = 50;
  auto* tr = app.add_subcommand("trace", "dump one backward trajectory as CSV");
  add_common(tr, tr_c);
  tr->add_option("--x", xs, "start position, comma separated");
  tr->add_option("--v", vs, "start velocity, comma separated");
  tr->add_option("--t", t0, "start time");
  tr->add_option("--steps", steps, "rows in the output")->check(CLI::PositiveNumber);

  int n_radial = 48, n_dir = 16, n_omega = 16;
  auto* cal = app.add_subcommand("calibrate-kernels", "fit the kernel constants against direct integrals");
  add_common(cal, cal_c);
  cal->add_option("--radial", n_radial, "radial nodes");
  cal->add_option("--directions", n_dir, "polar directions");
  cal->add_option("--omega", n_omega, "polar scattering directions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return simulate(sim_c, t_end);
    if (*ver) return verify(ver_c);
    if (*tr) return trace_cmd(tr_c, xs, vs, t0, steps);
    if (*cal) return calibrate(cal_c, n_radial, n_dir, n_omega);
  } catch (const vpb::ConfigError& e) {
    print_nested(e);
    return kExitConfig;
  } catch (const vpb::NumericalError& e) {
    print_nested(e);
    return kExitNumerical;
  } catch (const std::exception& e) {
    print_nested(e);
    return kExitNumerical;
  }
  return 0;
}
