#include "vpb/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "vpb/errors.hpp"
#include "vpb/io.hpp"

namespace vpb {

std::vector<std::string> config_violations(const RunConfig& c) {
  std::vector<std::string> v;
  const PhysicsSpec& p = c.physics;
  if (!(p.theta_tilde > 0.0)) v.push_back("theta_tilde > 0");
  if (!(p.theta_tilde < p.theta)) v.push_back("theta_tilde < theta");
  if (!(p.theta < 0.25)) v.push_back("theta < 1/4");
  if (!(p.p > 3.0)) v.push_back("p > 3");
  if (!(p.p < 6.0)) v.push_back("p < 6");
  if (!(p.beta > 1.0 - 2.0 / p.p)) v.push_back("beta > 1 - 2/p");
  if (!(p.beta < 2.0 / 3.0)) v.push_back("beta < 2/3");
  if (!(p.epsilon > 0.0)) v.push_back("epsilon > 0");
  if (c.domain.shape != "ball" && c.domain.shape != "ellipsoid") v.push_back("domain.shape in {ball, ellipsoid}");
  if (!(c.domain.semi_axes.minCoeff() > 0.0)) v.push_back("semi_axes > 0");
  if (c.grid.n_x < 4) v.push_back("n_x >= 4");
  if (c.grid.n_v < 4) v.push_back("n_v >= 4");
  if (!(c.grid.v_max > 0.0)) v.push_back("v_max > 0");
  if (c.grid.surface_order < 2) v.push_back("surface_order >= 2");
  if (c.grid.angular_order < 2) v.push_back("angular_order >= 2");
  if (!(c.march.dt >= 0.0)) v.push_back("dt >= 0");
  if (!(c.march.t_end >= 0.0)) v.push_back("t_end >= 0");
  if (!(c.march.picard_tol > 0.0)) v.push_back("picard_tol > 0");
  if (c.march.picard_max_iter < 1) v.push_back("picard_max_iter >= 1");
  if (!(c.march.poisson_tol > 0.0)) v.push_back("poisson_tol > 0");
  if (c.march.poisson_max_iter < 1) v.push_back("poisson_max_iter >= 1");
  if (c.init.kind != "maxwellian" && c.init.kind != "perturbed") v.push_back("init in {maxwellian, perturbed}");
  if (c.init.mode != "density" && c.init.mode != "flow" && c.init.mode != "thermal" && c.init.mode != "mixed")
    v.push_back("init.mode in {density, flow, thermal, mixed}");
  if (!(std::abs(c.init.amplitude) + std::abs(c.init.offset) < 0.5)) v.push_back("|amplitude| + |offset| < 1/2");
  if (c.io.snapshot_every < 0) v.push_back("snapshot_every >= 0");
  if (c.io.w1p_every < 0) v.push_back("w1p_every >= 0");
  if (c.threads < 0) v.push_back("threads >= 0");
  return v;
}

void validate_config(const RunConfig& c) {
  const auto v = config_violations(c);
  if (v.empty()) return;
  std::string all;
  for (std::size_t i = 1; i < v.size(); ++i) all += "; " + v[i];
  throw ConstraintViolation(v.front() + all);
}

namespace {

void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n.IsMap()) throw ParseError(where + " must be a mapping");
  for (const auto& kv : n) {
    const std::string k = kv.first.as<std::string>();
    if (!allowed.count(k)) throw ParseError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
  if (!n[key]) return;
  try {
    out = n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("bad value for '") + key + "': " + e.what());
  }
}

RunConfig from_node(const YAML::Node& root) {
  RunConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "config", {"domain", "grid", "physics", "march", "init", "io", "seed", "threads"});
  if (auto d = root["domain"]) {
    check_keys(d, "domain", {"shape", "semi_axes"});
    read(d, "shape", c.domain.shape);
    if (d["semi_axes"]) {
      std::vector<double> a;
      read(d, "semi_axes", a);
      if (a.size() != 3) throw ParseError("semi_axes needs three values");
      c.domain.semi_axes = Vec3(a[0], a[1], a[2]);
    }
  }
  if (auto g = root["grid"]) {
    check_keys(g, "grid", {"n_x", "n_v", "v_max", "surface_order", "angular_order"});
    read(g, "n_x", c.grid.n_x);
    read(g, "n_v", c.grid.n_v);
    read(g, "v_max", c.grid.v_max);
    read(g, "surface_order", c.grid.surface_order);
    read(g, "angular_order", c.grid.angular_order);
  }
  if (auto p = root["physics"]) {
    check_keys(p, "physics", {"theta", "theta_tilde", "epsilon", "beta", "p", "collisions"});
    read(p, "theta", c.physics.theta);
    read(p, "theta_tilde", c.physics.theta_tilde);
    read(p, "epsilon", c.physics.epsilon);
    read(p, "beta", c.physics.beta);
    read(p, "p", c.physics.p);
    read(p, "collisions", c.physics.collisions);
  }
  if (auto m = root["march"]) {
    check_keys(m, "march", {"dt", "t_end", "picard_tol", "picard_max_iter", "poisson_tol", "poisson_max_iter"});
    read(m, "dt", c.march.dt);
    read(m, "t_end", c.march.t_end);
    read(m, "picard_tol", c.march.picard_tol);
    read(m, "picard_max_iter", c.march.picard_max_iter);
    read(m, "poisson_tol", c.march.poisson_tol);
    read(m, "poisson_max_iter", c.march.poisson_max_iter);
  }
  if (auto i = root["init"]) {
    if (i.IsScalar()) {
      c.init.kind = i.as<std::string>();
    } else {
      check_keys(i, "init", {"kind", "amplitude", "mode", "offset"});
      read(i, "kind", c.init.kind);
      read(i, "amplitude", c.init.amplitude);
      read(i, "mode", c.init.mode);
      read(i, "offset", c.init.offset);
    }
  }
  if (auto o = root["io"]) {
    check_keys(o, "io", {"out", "snapshot_every", "w1p_every"});
    read(o, "out", c.io.out_dir);
    read(o, "snapshot_every", c.io.snapshot_every);
    read(o, "w1p_every", c.io.w1p_every);
  }
  read(root, "seed", c.seed);
  read(root, "threads", c.threads);
  return c;
}

}  // namespace

RunConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  RunConfig c = from_node(root);
  validate_config(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

std::string to_yaml(const RunConfig& c) {
  auto num = [](double x) { return format_double(x); };
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap << YAML::Key << "shape" << YAML::Value
    << c.domain.shape << YAML::Key << "semi_axes" << YAML::Value << YAML::Flow
    << std::vector<std::string>{num(c.domain.semi_axes[0]), num(c.domain.semi_axes[1]), num(c.domain.semi_axes[2])} << YAML::EndMap;
  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "n_x" << YAML::Value << c.grid.n_x << YAML::Key << "n_v" << YAML::Value << c.grid.n_v;
  e << YAML::Key << "v_max" << YAML::Value << num(c.grid.v_max);
  e << YAML::Key << "surface_order" << YAML::Value << c.grid.surface_order;
  e << YAML::Key << "angular_order" << YAML::Value << c.grid.angular_order << YAML::EndMap;
  e << YAML::Key << "physics" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "theta" << YAML::Value << num(c.physics.theta);
  e << YAML::Key << "theta_tilde" << YAML::Value << num(c.physics.theta_tilde);
  e << YAML::Key << "epsilon" << YAML::Value << num(c.physics.epsilon);
  e << YAML::Key << "beta" << YAML::Value << num(c.physics.beta);
  e << YAML::Key << "p" << YAML::Value << num(c.physics.p);
  e << YAML::Key << "collisions" << YAML::Value << c.physics.collisions << YAML::EndMap;
  e << YAML::Key << "march" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dt" << YAML::Value << num(c.march.dt) << YAML::Key << "t_end" << YAML::Value << num(c.march.t_end);
  e << YAML::Key << "picard_tol" << YAML::Value << num(c.march.picard_tol);
  e << YAML::Key << "picard_max_iter" << YAML::Value << c.march.picard_max_iter;
  e << YAML::Key << "poisson_tol" << YAML::Value << num(c.march.poisson_tol);
  e << YAML::Key << "poisson_max_iter" << YAML::Value << c.march.poisson_max_iter << YAML::EndMap;
  e << YAML::Key << "init" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << c.init.kind;
  e << YAML::Key << "amplitude" << YAML::Value << num(c.init.amplitude);
  e << YAML::Key << "mode" << YAML::Value << c.init.mode;
  e << YAML::Key << "offset" << YAML::Value << num(c.init.offset) << YAML::EndMap;
  e << YAML::Key << "io" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "out" << YAML::Value << c.io.out_dir;
  e << YAML::Key << "snapshot_every" << YAML::Value << c.io.snapshot_every;
  e << YAML::Key << "w1p_every" << YAML::Value << c.io.w1p_every << YAML::EndMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "threads" << YAML::Value << c.threads;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace vpb
