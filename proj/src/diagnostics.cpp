#include "vpb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vpb/errors.hpp"
#include "vpb/parallel.hpp"

namespace vpb {

double total_mass(const DistributionField& F) {
  const std::size_t ns = F.n_space(), nv = F.n_velocity();
  const auto& w = F.space().mass_weight();
  std::vector<double> per(ns);
  parallel_for(ns, [&](std::size_t b, std::size_t e) {
    std::vector<double> col(nv);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < nv; ++j) col[j] = F.at(j, i);
      per[i] = w[i] * F.velocity().integrate(col);
    }
  });
  return pairwise_sum(per);
}

double weighted_sup_norm(const PerturbationField& f, double theta) {
  const std::size_t ns = f.space->n_interior();
  const auto& s2 = f.velocity->speed2();
  double m = 0.0;
  for (std::size_t j = 0; j < f.velocity->size(); ++j) {
    const double w = std::exp(theta * s2[j]);
    for (std::size_t i = 0; i < ns; ++i) m = std::max(m, w * std::abs(f.values[j * ns + i]));
  }
  return m;
}

double lp_norm(const PerturbationField& f, double p) {
  const std::size_t ns = f.space->n_interior();
  const auto& w = f.space->mass_weight();
  std::vector<double> per(f.velocity->size());
  for (std::size_t j = 0; j < per.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < ns; ++i) s += w[i] * std::pow(std::abs(f.values[j * ns + i]), p);
    per[j] = s;
  }
  return std::pow(pairwise_sum(per) * f.velocity->cell_volume(), 1.0 / p);
}

double l2_norm(const PerturbationField& f) {
  const std::size_t ns = f.space->n_interior();
  const auto& w = f.space->mass_weight();
  std::vector<double> per(f.velocity->size());
  for (std::size_t j = 0; j < per.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < ns; ++i) s += w[i] * f.values[j * ns + i] * f.values[j * ns + i];
    per[j] = s;
  }
  return std::sqrt(pairwise_sum(per) * f.velocity->cell_volume());
}

void check_exponents(double beta, double p) {
  if (!(p > 3.0 && p < 6.0)) throw BadExponents("need 3 < p < 6, got p = " + std::to_string(p));
  if (!(beta > 1.0 - 2.0 / p && beta < 2.0 / 3.0))
    throw BadExponents("need 1 - 2/p < beta < 2/3, got beta = " + std::to_string(beta));
}

W1pResult alpha_weighted_w1p_ex(const PerturbationField& f, const FieldHistory& H, double beta, double p,
                                const W1pOptions& opt) {
  check_exponents(beta, p);
  const SpatialGrid& g = *f.space;
  const VelocityGrid& vg = *f.velocity;
  const std::size_t ns = g.n_interior(), nv = vg.size();
  const int n = vg.n();
  const auto& mw = g.mass_weight();
  const WeightParams wp{opt.epsilon};

  // spatial neighbours per interior node and axis: (minus, plus), -1 if not interior
  std::vector<std::array<int, 6>> nb(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    int c[3];
    g.unpack(g.interior_nodes()[i], c[0], c[1], c[2]);
    for (int a = 0; a < 3; ++a)
      for (int s = 0; s < 2; ++s) {
        int d[3] = {c[0], c[1], c[2]};
        d[a] += s ? 1 : -1;
        int idx = -1;
        if (d[a] >= 0 && d[a] < g.dim()) idx = g.interior_index(g.box_index(d[0], d[1], d[2]));
        nb[i][2 * a + s] = idx;
      }
  }

  std::vector<double> per(nv, 0.0);
  std::vector<std::size_t> excluded(nv, 0);
  parallel_for(nv, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      int iv[3];
      vg.unpack(j, iv[0], iv[1], iv[2]);
      const Vec3 v = vg.node(j);
      const double w = std::exp(opt.theta_tilde * v.squaredNorm());
      const double* fj = f.values.data() + j * ns;
      double acc = 0.0;
      for (std::size_t i = 0; i < ns; ++i) {
        double grad2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          const int m = nb[i][2 * a], pl = nb[i][2 * a + 1];
          const double h = g.h()[a];
          double d = 0.0;
          if (m >= 0 && pl >= 0) d = (fj[pl] - fj[m]) / (2 * h);
          else if (pl >= 0) d = (fj[pl] - fj[i]) / h;
          else if (m >= 0) d = (fj[i] - fj[m]) / h;
          grad2 += d * d;
        }
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {iv[0], iv[1], iv[2]}, hi[3] = {iv[0], iv[1], iv[2]};
          lo[a] = std::max(0, iv[a] - 1);
          hi[a] = std::min(n - 1, iv[a] + 1);
          if (lo[a] == hi[a]) continue;
          const double fl = f.values[vg.index(lo[0], lo[1], lo[2]) * ns + i];
          const double fh = f.values[vg.index(hi[0], hi[1], hi[2]) * ns + i];
          const double d = (fh - fl) / ((hi[a] - lo[a]) * vg.h());
          grad2 += d * d;
        }
        if (grad2 == 0.0) continue;
        const KineticWeight kw = kinetic_weight_ex({f.time, g.interior_position(i), v}, H, wp, opt.integrator);
        if (kw.grazing) {
          ++excluded[j];
          continue;
        }
        acc += mw[i] * std::pow(w * std::pow(kw.value, beta) * std::sqrt(grad2), p);
      }
      per[j] = acc;
    }
  });
  W1pResult r;
  r.value = std::pow(pairwise_sum(per) * vg.cell_volume(), 1.0 / p);
  r.nodes = ns * nv;
  for (auto x : excluded) r.grazing_excluded += x;
  return r;
}

double alpha_weighted_w1p(const PerturbationField& f, const FieldHistory& H, double beta, double p,
                          const W1pOptions& opt) {
  return alpha_weighted_w1p_ex(f, H, beta, p, opt).value;
}

namespace {

Eigen::Matrix<double, 5, 1> basis(const Vec3& v) {
  Eigen::Matrix<double, 5, 1> b;
  b << 1.0, v[0], v[1], v[2], 0.5 * (v.squaredNorm() - 3.0);
  return b;
}

}  // namespace

MacroMoments macroscopic_projection(const VelocityGrid& grid, std::span<const double> f) {
  Eigen::Matrix<double, 5, 5> G = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> r = Eigen::Matrix<double, 5, 1>::Zero();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::Matrix<double, 5, 1> b = basis(grid.node(j)) * grid.sqrt_mu()[j];
    G += b * b.transpose();
    r += b * f[j];
  }
  const Eigen::Matrix<double, 5, 1> c = G.ldlt().solve(r);
  return {c[0], Vec3(c[1], c[2], c[3]), c[4]};
}

std::vector<double> reconstruct(const VelocityGrid& grid, const MacroMoments& m) {
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Vec3 v = grid.node(j);
    out[j] = (m.a + m.b.dot(v) + 0.5 * (v.squaredNorm() - 3.0) * m.c) * grid.sqrt_mu()[j];
  }
  return out;
}

DecayFit decay_fit(std::span<const double> t, std::span<const double> values, double window) {
  if (t.size() != values.size()) throw ConfigError("decay_fit needs equally long series");
  for (double v : values)
    if (!(v > 0.0)) throw NonPositiveValues("decay_fit needs positive values");
  const std::size_t n = t.size();
  const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(window * n)));
  if (n < 2) throw ConfigError("decay_fit needs at least two points");
  const std::size_t start = n - std::min(n, k);
  double st = 0, sy = 0;
  const std::size_t m = n - start;
  for (std::size_t i = start; i < n; ++i) {
    st += t[i];
    sy += std::log(values[i]);
  }
  const double tm = st / m, ym = sy / m;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = start; i < n; ++i) {
    const double dt = t[i] - tm, dy = std::log(values[i]) - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  DecayFit fit;
  fit.points = m;
  const double slope = stt > 0 ? sty / stt : 0.0;
  fit.rate = -slope;
  fit.intercept = ym - slope * tm;
  fit.r2 = syy > 0 ? (sty * sty) / (stt * syy) : 1.0;
  return fit;
}

InvarianceResult alpha_invariance_residual(const FieldHistory& H, int n_samples, std::uint64_t seed,
                                           const InvarianceOptions& opt) {
  const ConvexDomain& dom = H.domain();
  const WeightParams wp{opt.epsilon};
  std::vector<double> res(n_samples, 0.0);
  std::vector<char> grazing(n_samples, 0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      std::mt19937_64 rng(seed + k);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> gn(0.0, opt.v_scale);
      const Box& bb = dom.bbox();
      Vec3 x;
      do x = bb.lo + Vec3(u(rng), u(rng), u(rng)).cwiseProduct(bb.hi - bb.lo);
      while (!dom.contains(x));
      const Vec3 v(gn(rng), gn(rng), gn(rng));
      const double t = opt.t_min + (opt.t_max - opt.t_min) * u(rng);
      const PhasePoint p{t, x, v};
      const KineticWeight a1 = kinetic_weight_ex(p, H, wp, opt.integrator);
      const double reach = a1.exit.hit ? a1.exit.t_b : t + opt.epsilon;
      const double s = 0.9 * u(rng) * std::min(reach, t);
      const PhasePoint q = trace(p, H, t - s, opt.integrator);
      const KineticWeight a2 = kinetic_weight_ex(q, H, wp, opt.integrator);
      if (a1.grazing || a2.grazing) {
        grazing[k] = 1;
        continue;
      }
      res[k] = std::abs(a2.value - a1.value) / std::max(std::abs(a1.value), 1e-300);
    }
  });
  InvarianceResult r;
  r.samples = n_samples;
  for (int k = 0; k < n_samples; ++k) {
    if (grazing[k]) ++r.grazing_excluded;
    r.max_residual = std::max(r.max_residual, res[k]);
  }
  return r;
}

std::vector<double> stability_distance(const std::vector<PerturbationField>& a,
                                       const std::vector<PerturbationField>& b, double delta) {
  if (a.size() != b.size()) throw GridMismatch("runs have different snapshot counts");
  std::vector<double> out;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].space->same_as(*b[k].space) || !(*a[k].velocity == *b[k].velocity) ||
        a[k].values.size() != b[k].values.size())
      throw GridMismatch("snapshot grids differ");
    if (std::abs(a[k].time - b[k].time) > 1e-9 * (1.0 + std::abs(a[k].time)))
      throw GridMismatch("snapshot times differ");
    PerturbationField d = a[k];
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b[k].values[i];
    out.push_back(lp_norm(d, 1.0 + delta));
  }
  return out;
}

GrowthEnvelope growth_envelope(std::span<const double> t, std::span<const double> values) {
  GrowthEnvelope g;
  const std::size_t n = t.size();
  if (n < 2 || values.size() != n) return g;
  for (double v : values)
    if (!(v > 0.0)) throw NonPositiveValues("growth envelope needs positive values");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::log(values[i] / values[0]);
    const double dt = t[i] - t[0];
    if (dt > 0.0) g.C = std::max(g.C, y[i] / dt);
  }
  if (n < 4) return g;
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = t[i] - t[0];
    A(i, 0) = 1.0;
    A(i, 1) = dt;
    A(i, 2) = dt * dt;
    b[i] = y[i];
  }
  const Eigen::MatrixXd AtA = A.transpose() * A;
  const Eigen::Vector3d c = AtA.ldlt().solve(A.transpose() * b);
  const Eigen::VectorXd r = b - A * c;
  const double s2 = r.squaredNorm() / std::max<double>(1.0, static_cast<double>(n) - 3.0);
  const Eigen::Matrix3d cov = s2 * AtA.inverse();
  g.curvature = c[2];
  g.curvature_se = std::sqrt(std::max(0.0, cov(2, 2)));
  const double T = t[n - 1] - t[0];
  g.super_exponential = c[2] > 3.0 * g.curvature_se && c[2] * T * T > 0.1;
  return g;
}

}  // namespace vpb
