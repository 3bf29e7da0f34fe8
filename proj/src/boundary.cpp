#include "vpb/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vpb/collision.hpp"
#include "vpb/errors.hpp"
#include "vpb/halfspace.hpp"
#include "vpb/parallel.hpp"

namespace vpb {

double c_mu() { return std::sqrt(kTwoPi); }

double outgoing_flux(const VelocityGrid& grid, std::span<const double> F, const Vec3& n) {
  const std::vector<double> w = half_space_weights(grid, n);
  std::vector<double> terms(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) terms[j] = w[j] * F[j];
  return pairwise_sum(terms);
}

double c_mu_identity(const VelocityGrid& grid, const Vec3& n) {
  return c_mu() * outgoing_flux(grid, grid.mu(), n);
}

double apply_diffuse_bc(double flux, const Vec3& v, const Vec3& n) {
  if (n.dot(v) >= 0.0) throw WrongSide("diffuse reflection needs an incoming velocity");
  return c_mu() * maxwellian(v) * flux;
}

double null_flux_residual(const VelocityGrid& grid, std::span<const double> F, const Vec3& n) {
  return outgoing_flux(grid, F, n) - outgoing_flux(grid, F, -n);
}

Vec3 sample_sigma(const Vec3& n_in, std::mt19937_64& rng) {
  const Vec3 n = n_in.normalized();
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double a = gauss(rng), b = gauss(rng);
  const double r = std::sqrt(a * a + b * b);
  Vec3 t1, t2;
  tangent_basis(n, t1, t2);
  const double g1 = gauss(rng), g2 = gauss(rng);
  return r * n + g1 * t1 + g2 * t2;
}

double sigma_density(const Vec3& n, const Vec3& v) {
  const double nv = n.dot(v);
  return nv > 0.0 ? c_mu() * maxwellian(v) * nv : 0.0;
}

BoundaryFluxTable::BoundaryFluxTable(std::vector<SurfacePoint> nodes) : nodes_(std::move(nodes)) {}

void BoundaryFluxTable::add(double t, std::vector<double> values) {
  if (values.size() != nodes_.size()) throw GridMismatch("flux table values do not match the surface nodes");
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const auto pos = it - times_.begin();
  if (it != times_.end() && *it == t) {
    values_[pos] = std::move(values);
    return;
  }
  times_.insert(it, t);
  values_.insert(values_.begin() + pos, std::move(values));
}

BoundaryFluxTable::SpatialWeights BoundaryFluxTable::spatial_weights(const Vec3& x) const {
  SpatialWeights sw{{0, 0, 0}, {0, 0, 0}};
  double best[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double d = (nodes_[i].position - x).squaredNorm();
    if (d < best[2]) {
      int slot = 2;
      while (slot > 0 && d < best[slot - 1]) {
        best[slot] = best[slot - 1];
        sw.index[slot] = sw.index[slot - 1];
        --slot;
      }
      best[slot] = d;
      sw.index[slot] = static_cast<int>(i);
    }
  }
  const int m = static_cast<int>(std::min<std::size_t>(3, nodes_.size()));
  if (best[0] < 1e-24) {
    sw.weight[0] = 1.0;
    return sw;
  }
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    sw.weight[i] = 1.0 / best[i];
    total += sw.weight[i];
  }
  for (int i = 0; i < m; ++i) sw.weight[i] /= total;
  return sw;
}

double BoundaryFluxTable::flux(double t, const Vec3& x) const {
  if (times_.empty()) return 0.0;
  const SpatialWeights sw = spatial_weights(x);
  auto at = [&](std::size_t k) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += sw.weight[i] * values_[k][sw.index[i]];
    return s;
  };
  if (t <= times_.front()) return at(0);
  if (t >= times_.back()) return at(times_.size() - 1);
  const std::size_t k1 = std::upper_bound(times_.begin(), times_.end(), t) - times_.begin();
  const std::size_t k0 = k1 - 1;
  const double w = (t - times_[k0]) / (times_[k1] - times_[k0]);
  return (1.0 - w) * at(k0) + w * at(k1);
}

double collision_frequency_fast(double speed) {
  static const double dv = 0.005;
  static const std::vector<double> table = [] {
    std::vector<double> t(8001);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = collision_frequency(Vec3(i * dv, 0, 0));
    return t;
  }();
  const double s = speed / dv;
  if (s >= static_cast<double>(table.size() - 1)) return collision_frequency(Vec3(speed, 0, 0));
  const std::size_t i = static_cast<std::size_t>(s);
  const double f = s - i;
  return (1.0 - f) * table[i] + f * table[i + 1];
}

namespace {

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Proposal concentrating on velocities with short chord times: normal
// component r ~ Gamma(2, s), tangential |T|^2 shifted past 2r/s - r^2.
struct Proposal {
  double s, lambda;

  double log_sigma(double r, double T2) const {
    if (r <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(r) - 0.5 * r * r - 0.5 * T2 - std::log(kTwoPi);
  }
  double log_g(double r, double T2) const {
    if (r <= 0.0) return -std::numeric_limits<double>::infinity();
    const double c = std::max(0.0, 2.0 * r / s - r * r);
    if (T2 < c) return -std::numeric_limits<double>::infinity();
    return std::log(r) - r / s - 2.0 * std::log(s) + std::log(0.5) - 0.5 * (T2 - c) - std::log(kPi);
  }
  double log_q(double r, double T2) const {
    return log_sum_exp(std::log(lambda) + log_sigma(r, T2), std::log1p(-lambda) + log_g(r, T2));
  }
};

}  // namespace

StochasticCycle stochastic_cycle(const PhasePoint& p, const FieldHistory& H, int k, std::mt19937_64& rng,
                                 const CycleOptions& opt) {
  if (k < 1) throw ConfigError("stochastic cycles need k >= 1");
  StochasticCycle cyc;
  cyc.k = k;
  if (p.t <= 0.0) return cyc;
  const ConvexDomain& dom = H.domain();
  const BackwardExit first = backward_exit(p, H, p.t);
  if (!first.hit) return cyc;
  cyc.nodes.push_back({p.t - first.t_b, first.x_b, Vec3::Zero()});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto u01 = [&] {
    double u;
    do u = unif(rng);
    while (u <= 0.0);
    return u;
  };
  for (int j = 1; j < k; ++j) {
    CycleNode& cur = cyc.nodes.back();
    if (cur.t <= 0.0) break;
    const Vec3 n = normal(dom, cur.x);
    Vec3 t1, t2;
    tangent_basis(n, t1, t2);
    const Proposal prop{std::clamp(opt.kappa * cur.t / (k - j), 1e-300, opt.scale_cap), opt.defensive};
    BackwardExit be;
    Vec3 v;
    double log_ratio = 0.0;
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= opt.max_resample) {
        cyc.degenerate = true;
        return cyc;
      }
      if (!opt.importance || unif(rng) < prop.lambda) {
        v = sample_sigma(n, rng);
      } else {
        const double r = -prop.s * (std::log(u01()) + std::log(u01()));
        const double c = std::max(0.0, 2.0 * r / prop.s - r * r);
        const double T = std::sqrt(c - 2.0 * std::log(u01()));
        const double ang = kTwoPi * unif(rng);
        v = r * n + T * (std::cos(ang) * t1 + std::sin(ang) * t2);
      }
      if (opt.importance) {
        const double r = n.dot(v);
        const double T2 = (v - r * n).squaredNorm();
        log_ratio = prop.log_sigma(r, T2) - prop.log_q(r, T2);
      }
      be = backward_exit({cur.t, cur.x, v}, H, cur.t);
      if (!be.hit) break;
      if (std::abs(normal(dom, be.x_b).dot(be.v_b)) >= kGrazingCutoff) break;
      ++cyc.grazing_resamples;
    }
    cur.v = v;
    cyc.log_weight += log_ratio;
    if (opt.damping) {
      const double nu_bar = 0.5 * (collision_frequency_fast(v.norm()) + collision_frequency_fast(be.v_b.norm()));
      cyc.log_damping -= nu_bar * be.t_b;
    }
    if (j == k - 1) cyc.w_tilde_last = std::exp(-opt.theta * v.squaredNorm()) / sqrt_maxwellian(v);
    if (!be.hit) {
      cyc.nodes.push_back({-std::numeric_limits<double>::infinity(), be.x_b, Vec3::Zero()});
      break;
    }
    const double t_next = cyc.nodes.back().t - be.t_b;
    cyc.nodes.push_back({t_next, be.x_b, Vec3::Zero()});
  }
  cyc.alive = static_cast<int>(cyc.nodes.size()) == k && cyc.nodes.back().t > 0.0;
  return cyc;
}

CycleTail cycle_tail_mass(const Vec3& x, const Vec3& v, double t, const FieldHistory& H, int k, int n_samples,
                          std::uint64_t seed, const CycleOptions& opt_in) {
  CycleOptions opt = opt_in;
  opt.damping = true;
  std::vector<double> val(n_samples, 0.0), wval(n_samples, 0.0);
  std::vector<char> degenerate(n_samples, 0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      std::mt19937_64 rng(seed + i);
      const StochasticCycle c = stochastic_cycle({t, x, v}, H, k, rng, opt);
      if (c.degenerate) {
        degenerate[i] = 1;
        continue;
      }
      if (!c.alive) continue;
      val[i] = std::exp(c.log_weight);
      wval[i] = std::exp(c.log_weight + c.log_damping) * c.w_tilde_last;
    }
  });
  CycleTail r;
  int used = 0;
  for (int i = 0; i < n_samples; ++i) {
    if (degenerate[i]) {
      ++r.degenerate;
      val[i] = wval[i] = 0.0;
    } else {
      ++used;
    }
  }
  r.samples = used;
  if (used == 0) return r;
  auto stats = [&](const std::vector<double>& a, double& mean, double& se) {
    mean = pairwise_sum(a) / used;
    std::vector<double> sq(a.size(), 0.0);
    for (int i = 0; i < n_samples; ++i)
      if (!degenerate[i]) sq[i] = (a[i] - mean) * (a[i] - mean);
    const double var = used > 1 ? pairwise_sum(sq) / (used - 1) : 0.0;
    se = std::sqrt(var / used);
  };
  stats(val, r.mass, r.std_error);
  stats(wval, r.weighted_mass, r.weighted_std_error);
  return r;
}

}  // namespace vpb
