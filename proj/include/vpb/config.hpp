#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vpb/common.hpp"

namespace vpb {

struct DomainSpec {
  std::string shape = "ball";  // ball | ellipsoid
  Vec3 semi_axes = Vec3(1.0, 1.0, 1.0);
};

struct GridSpec {
  int n_x = 16;
  int n_v = 24;
  double v_max = 6.0;
  int surface_order = 12;  // wall stations: order x 2 order
  int angular_order = 8;   // collision sphere rule
};

struct PhysicsSpec {
  double theta = 0.1;
  double theta_tilde = 0.05;
  double epsilon = 0.05;
  double beta = 0.6;
  double p = 4.0;
  bool collisions = true;
};

struct MarchSpec {
  double dt = 0.0;  // 0 selects min(0.05, 0.5 h_x / v_max)
  double t_end = 1.0;
  double picard_tol = 1e-6;
  int picard_max_iter = 30;
  double poisson_tol = 1e-11;
  int poisson_max_iter = 5000;
};

struct InitSpec {
  std::string kind = "maxwellian";  // maxwellian | perturbed
  double amplitude = 0.01;
  std::string mode = "density";     // density | flow | thermal | mixed
  double offset = 0.0;              // extra density amplitude, for paired runs
};

struct IoSpec {
  std::string out_dir = "out";
  int snapshot_every = 0;  // 0 disables snapshots
  int w1p_every = 10;      // steps between weighted W^{1,p} evaluations, 0 disables
};

struct RunConfig {
  DomainSpec domain;
  GridSpec grid;
  PhysicsSpec physics;
  MarchSpec march;
  InitSpec init;
  IoSpec io;
  std::uint64_t seed = 1;
  int threads = 0;
};

// Every violated constraint, in a fixed order; empty when the config is valid.
std::vector<std::string> config_violations(const RunConfig& c);

// Throws ConstraintViolation naming the first broken constraint (all listed in what()).
void validate_config(const RunConfig& c);

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(const std::string& text);

std::string to_yaml(const RunConfig& c);

}  // namespace vpb
