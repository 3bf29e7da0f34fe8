#include "vpb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>

#include "vpb/collision.hpp"
#include "vpb/diagnostics.hpp"
#include "vpb/errors.hpp"
#include "vpb/halfspace.hpp"
#include "vpb/io.hpp"
#include "vpb/parallel.hpp"

namespace vpb {

PerturbationField to_perturbation(const DistributionField& F, double theta) {
  PerturbationField f{F.space_ptr(), F.velocity_ptr(), std::vector<double>(F.data().size()), F.time, theta};
  const std::size_t ns = F.n_space();
  const auto& mu = F.velocity().mu();
  const auto& sm = F.velocity().sqrt_mu();
  for (std::size_t j = 0; j < F.n_velocity(); ++j) {
    const double* src = F.data().data() + j * ns;
    double* dst = f.values.data() + j * ns;
    if (sm[j] < kSqrtMuFloor) {
      std::fill_n(dst, ns, 0.0);
      continue;
    }
    for (std::size_t i = 0; i < ns; ++i) dst[i] = (src[i] - mu[j]) / sm[j];
  }
  return f;
}

DistributionField from_perturbation(const PerturbationField& f) {
  DistributionField F(f.space, f.velocity, f.time);
  const std::size_t ns = F.n_space();
  const auto& mu = F.velocity().mu();
  const auto& sm = F.velocity().sqrt_mu();
  for (std::size_t j = 0; j < F.n_velocity(); ++j) {
    const double* src = f.values.data() + j * ns;
    double* dst = F.data().data() + j * ns;
    const double s = sm[j] < kSqrtMuFloor ? 0.0 : sm[j];
    for (std::size_t i = 0; i < ns; ++i) dst[i] = mu[j] + s * src[i];
  }
  return F;
}

double nu_of_F(const VelocityGrid& grid, std::span<const double> F, const Vec3& v) {
  std::vector<double> terms(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) terms[k] = (grid.node(k) - v).norm() * F[k];
  return kTwoPi * pairwise_sum(terms) * grid.cell_volume();
}

double default_time_step(const SpatialGrid& space, const VelocityGrid& velocity) {
  return std::min(0.05, 0.5 * space.h_max() / velocity.v_max());
}

namespace {

struct Stencil8 {
  int n = 0;
  std::size_t b[8];
  double w[8];
};

struct PathPoint {
  Vec3 x;
  double back;  // backward time from the step end
};

constexpr int kNu0 = 0, kG0 = 1, kNu1 = 2, kG1 = 3;

// E sampled at the box nodes, trilinear in between.
class NodalField {
 public:
  explicit NodalField(const PotentialField& phi) : g_(&phi.grid()), E_(g_->box_size(), Vec3::Zero()) {
    for (std::size_t b = 0; b < E_.size(); ++b) {
      try {
        E_[b] = phi.field(g_->node(b));
      } catch (const OutsideDomain&) {
      }
    }
  }

  Vec3 operator()(const Vec3& x) const {
    const Vec3 q = (x - g_->origin()).cwiseQuotient(g_->h());
    const int dim = g_->dim();
    int base[3];
    double fr[3];
    for (int d = 0; d < 3; ++d) {
      const double fl = std::floor(q[d]);
      base[d] = std::clamp(static_cast<int>(fl), 0, dim - 2);
      fr[d] = std::clamp(q[d] - base[d], 0.0, 1.0);
    }
    Vec3 r = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
      const int a0 = c & 1, a1 = (c >> 1) & 1, a2 = (c >> 2) & 1;
      const double w = (a0 ? fr[0] : 1 - fr[0]) * (a1 ? fr[1] : 1 - fr[1]) * (a2 ? fr[2] : 1 - fr[2]);
      r += w * E_[g_->box_index(base[0] + a0, base[1] + a1, base[2] + a2)];
    }
    return r;
  }

 private:
  const SpatialGrid* g_;
  std::vector<Vec3> E_;
};

}  // namespace

struct Solver::Impl {
  std::shared_ptr<const SpatialGrid> sp;
  std::shared_ptr<const VelocityGrid> vg;
  SolverOptions opt;
  std::size_t ns = 0, nv = 0;
  std::vector<Vec3> vnode;
  std::vector<double> nu_d;

  // box node -> interior index (>= 0), ghost (-2 - id) or unused (-1)
  std::vector<int> slot;
  std::vector<int> ghost_nearest;
  std::vector<Vec3> ghost_normal;
  std::vector<BoundaryFluxTable::SpatialWeights> ghost_w;
  std::vector<double> ghost_amp;
  std::vector<int> band_id;  // box node -> index into band_w
  std::vector<BoundaryFluxTable::SpatialWeights> band_w;

  std::vector<SurfacePoint> st;
  std::vector<std::vector<double>> Wp, Wm;
  std::vector<double> ctilde, b_in;
  std::vector<std::vector<double>> st_out;  // outgoing F per station (all velocity slots)
  std::vector<double> amp_start, amp_end, flux, resid;
  double t_wall = 0.0;
  double hs_err = 0.0;
  bool initialized = false;

  std::unique_ptr<LinearizedCollision> lc;
  Eigen::MatrixXd K2, D;
  bool have_mats = false;
  Eigen::MatrixXd psi;  // nv x 5
  Eigen::LDLT<Eigen::Matrix<double, 5, 5>> gram;
  std::vector<double> cache;

  double min_ratio = std::numeric_limits<double>::infinity();

  Impl(std::shared_ptr<const SpatialGrid> s, std::shared_ptr<const VelocityGrid> v, SolverOptions o)
      : sp(std::move(s)), vg(std::move(v)), opt(o) {
    ns = sp->n_interior();
    nv = vg->size();
    vnode.resize(nv);
    for (std::size_t j = 0; j < nv; ++j) vnode[j] = vg->node(j);
    const ConvexDomain& dom = sp->domain();

    st = boundary_quadrature(dom, opt.surface_order);
    BoundaryFluxTable locator(st);
    const std::size_t nb = sp->box_size();
    slot.assign(nb, -1);
    band_id.assign(nb, -1);
    const double band = 1.5 * sp->h_max();
    for (std::size_t b = 0; b < nb; ++b) {
      const int ii = sp->interior_index(b);
      const Vec3 x = sp->node(b);
      if (ii >= 0) {
        slot[b] = ii;
      } else if (sp->nearest_interior(b) >= 0) {
        const int g = static_cast<int>(ghost_nearest.size());
        slot[b] = -2 - g;
        ghost_nearest.push_back(sp->nearest_interior(b));
        const Vec3 p = dom.project(x);
        ghost_normal.push_back(normal(dom, p));
        ghost_w.push_back(locator.spatial_weights(p));
      }
      if (std::abs(dom.distance_to_boundary(x)) < band) {
        band_id[b] = static_cast<int>(band_w.size());
        band_w.push_back(locator.spatial_weights(dom.project(x)));
      }
    }
    ghost_amp.assign(ghost_nearest.size(), 1.0);

    const std::size_t nst = st.size();
    Wp.resize(nst);
    Wm.resize(nst);
    ctilde.resize(nst);
    b_in.resize(nst);
    st_out.assign(nst, std::vector<double>(nv, 0.0));
    amp_start.assign(nst, 1.0);
    amp_end.assign(nst, 1.0);
    flux.assign(nst, 0.0);
    resid.assign(nst, 0.0);
    const auto& mu = vg->mu();
    parallel_for(nst, [&](std::size_t b, std::size_t e) {
      for (std::size_t s = b; s < e; ++s) {
        Wp[s] = half_space_weights(*vg, st[s].normal);
        Wm[s] = half_space_weights(*vg, -st[s].normal);
        std::vector<double> t(nv), u(nv);
        for (std::size_t j = 0; j < nv; ++j) {
          t[j] = Wm[s][j] * mu[j];
          u[j] = st[s].normal.dot(vnode[j]) > 0.0 ? 0.0 : Wp[s][j] * mu[j];
        }
        ctilde[s] = 1.0 / pairwise_sum(t);
        b_in[s] = pairwise_sum(u);
      }
    });
    for (std::size_t s = 0; s < nst; ++s) {
      std::vector<double> t(nv);
      for (std::size_t j = 0; j < nv; ++j) t[j] = Wp[s][j] * mu[j];
      hs_err = std::max(hs_err, std::abs(c_mu() * pairwise_sum(t) - 1.0));
    }

    nu_d = collision_frequency_table(*vg);
    psi.resize(static_cast<Eigen::Index>(nv), 5);
    Eigen::Matrix<double, 5, 5> G = Eigen::Matrix<double, 5, 5>::Zero();
    for (std::size_t j = 0; j < nv; ++j) {
      const Vec3& v = vnode[j];
      const double row[5] = {1.0, v[0], v[1], v[2], v.squaredNorm()};
      for (int a = 0; a < 5; ++a) {
        psi(j, a) = row[a];
        for (int c = 0; c < 5; ++c) G(a, c) += mu[j] * row[a] * row[c];
      }
    }
    gram.compute(G);
    cache.resize(4 * ns * nv);
  }

  void stencil(const Vec3& x, Stencil8& s) const {
    const Vec3 q = (x - sp->origin()).cwiseQuotient(sp->h());
    int base[3];
    double fr[3];
    const int dim = sp->dim();
    for (int d = 0; d < 3; ++d) {
      const double fl = std::floor(q[d]);
      base[d] = std::clamp(static_cast<int>(fl), 0, dim - 2);
      fr[d] = std::clamp(q[d] - base[d], 0.0, 1.0);
    }
    s.n = 0;
    double tot = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int a0 = c & 1, a1 = (c >> 1) & 1, a2 = (c >> 2) & 1;
      const double w = (a0 ? fr[0] : 1 - fr[0]) * (a1 ? fr[1] : 1 - fr[1]) * (a2 ? fr[2] : 1 - fr[2]);
      if (w == 0.0) continue;
      const std::size_t b = sp->box_index(base[0] + a0, base[1] + a1, base[2] + a2);
      if (slot[b] == -1) continue;
      s.b[s.n] = b;
      s.w[s.n] = w;
      ++s.n;
      tot += w;
    }
    if (tot > 0.0)
      for (int k = 0; k < s.n; ++k) s.w[k] /= tot;
  }

  int storage_of(std::size_t b) const {
    const int sl = slot[b];
    return sl >= 0 ? sl : ghost_nearest[-2 - sl];
  }

  double gather_F(const double* F, const Stencil8& s, std::size_t j) const {
    const double* plane = F + j * ns;
    double acc = 0.0;
    for (int k = 0; k < s.n; ++k) {
      const int sl = slot[s.b[k]];
      double val;
      if (sl >= 0) {
        val = plane[sl];
      } else {
        const int g = -2 - sl;
        val = ghost_normal[g].dot(vnode[j]) < 0.0 ? ghost_amp[g] * vg->mu()[j] : plane[ghost_nearest[g]];
      }
      acc += s.w[k] * val;
    }
    return acc;
  }

  void gather_cache(const Stencil8& s, std::size_t j, double w1, double& nu, double& g) const {
    double n0 = 0, g0 = 0, n1 = 0, g1 = 0;
    for (int k = 0; k < s.n; ++k) {
      const double* c = cache.data() + 4 * (j * ns + storage_of(s.b[k]));
      n0 += s.w[k] * c[kNu0];
      g0 += s.w[k] * c[kG0];
      n1 += s.w[k] * c[kNu1];
      g1 += s.w[k] * c[kG1];
    }
    nu = (1.0 - w1) * n0 + w1 * n1;
    g = (1.0 - w1) * g0 + w1 * g1;
  }

  double wall_amplitude(const Vec3& x, double w1) const {
    const Vec3 q = (x - sp->origin()).cwiseQuotient(sp->h());
    int c[3];
    for (int d = 0; d < 3; ++d) c[d] = std::clamp(static_cast<int>(std::lround(q[d])), 0, sp->dim() - 1);
    const int id = band_id[sp->box_index(c[0], c[1], c[2])];
    BoundaryFluxTable::SpatialWeights sw;
    if (id >= 0) {
      sw = band_w[id];
    } else {
      sw = BoundaryFluxTable(st).spatial_weights(x);
    }
    double a = 0.0;
    for (int k = 0; k < 3; ++k) a += sw.weight[k] * ((1.0 - w1) * amp_start[sw.index[k]] + w1 * amp_end[sw.index[k]]);
    return a;
  }

  void refresh_ghost_amp() {
    for (std::size_t g = 0; g < ghost_amp.size(); ++g) {
      const auto& sw = ghost_w[g];
      double a = 0.0;
      for (int k = 0; k < 3; ++k) a += sw.weight[k] * amp_start[sw.index[k]];
      ghost_amp[g] = a;
    }
  }

  // Outgoing flux, amplitude and residual per station from st_out.
  double bc_update() {
    const auto& mu = vg->mu();
    const std::size_t nst = st.size();
    parallel_for(nst, [&](std::size_t b, std::size_t e) {
      std::vector<double> t(nv), full(nv);
      for (std::size_t s = b; s < e; ++s) {
        for (std::size_t j = 0; j < nv; ++j)
          t[j] = st[s].normal.dot(vnode[j]) > 0.0 ? Wp[s][j] * st_out[s][j] : 0.0;
        const double A = pairwise_sum(t);
        flux[s] = A / (1.0 - ctilde[s] * b_in[s]);
        // incoming amplitude with zero net discrete flux
        for (std::size_t j = 0; j < nv; ++j)
          t[j] = st[s].normal.dot(vnode[j]) > 0.0 ? (Wp[s][j] - Wm[s][j]) * st_out[s][j] : 0.0;
        const double out_net = pairwise_sum(t);
        for (std::size_t j = 0; j < nv; ++j)
          t[j] = st[s].normal.dot(vnode[j]) > 0.0 ? 0.0 : (Wm[s][j] - Wp[s][j]) * mu[j];
        amp_end[s] = out_net / pairwise_sum(t);
        for (std::size_t j = 0; j < nv; ++j)
          full[j] = st[s].normal.dot(vnode[j]) > 0.0 ? st_out[s][j] : amp_end[s] * mu[j];
        for (std::size_t j = 0; j < nv; ++j) t[j] = (Wp[s][j] - Wm[s][j]) * full[j];
        resid[s] = pairwise_sum(t);
      }
    });
    double m = 0.0;
    for (double r : resid) m = std::max(m, std::abs(r));
    return m;
  }

  void ensure_mats() {
    if (have_mats) return;
    lc = std::make_unique<LinearizedCollision>(*vg);
    if (nv <= 6000) {
      K2 = lc->k2_matrix();
      D.resize(nv, nv);
      const double dv = vg->cell_volume();
      for (std::size_t j = 0; j < nv; ++j)
        for (std::size_t k = 0; k < nv; ++k) D(j, k) = kTwoPi * (vnode[j] - vnode[k]).norm() * dv;
    }
    have_mats = true;
  }

  void apply_mats(const Eigen::MatrixXd& H, const Eigen::MatrixXd& G, Eigen::MatrixXd& KH, Eigen::MatrixXd& DG) const {
    if (K2.size() > 0) {
      KH.noalias() = K2 * H;
      DG.noalias() = D * G;
      return;
    }
    KH.resize(H.rows(), H.cols());
    DG.resize(G.rows(), G.cols());
    const std::size_t blk = 256;
    const double dv = vg->cell_volume();
    Eigen::MatrixXd Kb, Db;
    for (std::size_t r0 = 0; r0 < nv; r0 += blk) {
      const std::size_t r1 = std::min(nv, r0 + blk);
      Kb.resize(r1 - r0, nv);
      Db.resize(r1 - r0, nv);
      for (std::size_t j = r0; j < r1; ++j)
        for (std::size_t k = 0; k < nv; ++k) {
          Kb(j - r0, k) = k == j ? lc->principal_cell(vnode[j]) : kernel_k2(vnode[j], vnode[k], lc->constants()) * dv;
          Db(j - r0, k) = kTwoPi * (vnode[j] - vnode[k]).norm() * dv;
        }
      KH.middleRows(r0, r1 - r0).noalias() = Kb * H;
      DG.middleRows(r0, r1 - r0).noalias() = Db * G;
    }
  }

  // nu(F) and the linearized gain at every interior node into cache slot (0 or 1).
  void compute_cache(const std::vector<double>& F, int which) {
    const int qn = which == 0 ? kNu0 : kNu1, qg = which == 0 ? kG0 : kG1;
    const auto& mu = vg->mu();
    const auto& sm = vg->sqrt_mu();
    const double mu_max = *std::max_element(mu.begin(), mu.end());
    std::vector<char> active(ns, 0);
    parallel_for(ns, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < nv; ++j) m = std::max(m, std::abs(F[j * ns + i] - mu[j]));
        active[i] = opt.collisions && m > opt.skip_threshold * mu_max;
        for (std::size_t j = 0; j < nv; ++j) {
          double* c = cache.data() + 4 * (j * ns + i);
          c[qn] = nu_d[j];
          c[qg] = nu_d[j] * mu[j];
        }
      }
    });
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < ns; ++i)
      if (active[i]) act.push_back(i);
    if (act.empty()) return;
    ensure_mats();
    const std::size_t blk = 32;
    const std::size_t nblk = (act.size() + blk - 1) / blk;
    parallel_for(nblk, [&](std::size_t b0, std::size_t b1) {
      Eigen::MatrixXd H, G, KH, DG;
      for (std::size_t bb = b0; bb < b1; ++bb) {
        const std::size_t a0 = bb * blk, a1 = std::min(act.size(), a0 + blk);
        const Eigen::Index m = static_cast<Eigen::Index>(a1 - a0);
        H.resize(nv, m);
        G.resize(nv, m);
        for (Eigen::Index c = 0; c < m; ++c) {
          const std::size_t i = act[a0 + c];
          for (std::size_t j = 0; j < nv; ++j) {
            const double g = F[j * ns + i] - mu[j];
            G(j, c) = g;
            H(j, c) = sm[j] < kSqrtMuFloor ? 0.0 : g / sm[j];
          }
        }
        apply_mats(H, G, KH, DG);
        Eigen::VectorXd nu(nv), gain(nv), loss(nv);
        for (Eigen::Index c = 0; c < m; ++c) {
          const std::size_t i = act[a0 + c];
          for (std::size_t j = 0; j < nv; ++j) {
            nu[j] = std::max(0.0, nu_d[j] + DG(j, c));
            gain[j] = nu_d[j] * mu[j] + sm[j] * KH(j, c);
            loss[j] = nu[j] * F[j * ns + i];
          }
          const Eigen::Matrix<double, 5, 1> r = psi.transpose() * (gain - loss);
          const Eigen::Matrix<double, 5, 1> coef = gram.solve(-r);
          const Eigen::VectorXd corr = psi * coef;
          for (std::size_t j = 0; j < nv; ++j) {
            double* cc = cache.data() + 4 * (j * ns + i);
            cc[qn] = nu[j];
            cc[qg] = std::max(0.0, gain[j] + mu[j] * corr[j]);
          }
        }
      }
    });
  }

  void copy_cache_slot0_to_1() {
    for (std::size_t k = 0; k < ns * nv; ++k) {
      cache[4 * k + kNu1] = cache[4 * k + kNu0];
      cache[4 * k + kG1] = cache[4 * k + kG0];
    }
  }

  // Value at (x, v_j) at time t0 + dt.
  double trace_value(const Vec3& x, std::size_t j, const double* Fs, const NodalField* phi, double dt) const {
    const ConvexDomain& dom = sp->domain();
    const Vec3& v = vnode[j];
    const double speed = v.norm();
    const double hmin = sp->h().minCoeff();
    PathPoint pts[64];
    int np = 0;
    bool hit = false;
    Vec3 v_foot = v;
    if (phi == nullptr) {
      const auto c = dom.chord(x, -v);
      const double s1 = c ? std::max(0.0, c->second) : 0.0;
      hit = s1 < dt;
      const double L = hit ? s1 : dt;
      const int M = std::clamp(static_cast<int>(std::ceil(speed * L / (0.5 * hmin))), opt.min_substeps, 63);
      for (int m = 0; m <= M; ++m) {
        const double s = L * m / M;
        pts[np++] = {x - s * v, s};
      }
    } else {
      const int M = std::clamp(static_cast<int>(std::ceil(speed * dt / (0.5 * hmin))), opt.min_substeps, 63);
      const double d = dt / M;
      Vec3 X = x, V = v;
      pts[np++] = {X, 0.0};
      auto rk4 = [&](const Vec3& x0, const Vec3& v0, double h, Vec3& x1, Vec3& v1) {
        const Vec3 k1x = v0, k1v = (*phi)(x0);
        const Vec3 k2x = v0 + 0.5 * h * k1v, k2v = (*phi)(x0 + 0.5 * h * k1x);
        const Vec3 k3x = v0 + 0.5 * h * k2v, k3v = (*phi)(x0 + 0.5 * h * k2x);
        const Vec3 k4x = v0 + h * k3v, k4v = (*phi)(x0 + h * k3x);
        x1 = x0 + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
        v1 = v0 + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
      };
      double back = 0.0;
      for (int m = 0; m < M; ++m) {
        Vec3 X1, V1;
        rk4(X, V, -d, X1, V1);
        if (dom.level(X1) > 0.0) {
          double lo = 0.0, hi = 1.0;
          for (int it = 0; it < 24; ++it) {
            const double mid = 0.5 * (lo + hi);
            rk4(X, V, -mid * d, X1, V1);
            (dom.level(X1) > 0.0 ? hi : lo) = mid;
          }
          rk4(X, V, -lo * d, X1, V1);
          back += lo * d;
          X = X1;
          V = V1;
          if (lo > 0.0) pts[np++] = {X, back};
          else pts[np - 1] = {X, back};
          hit = true;
          break;
        }
        X = X1;
        V = V1;
        back += d;
        pts[np++] = {X, back};
      }
      v_foot = V;
    }

    const PathPoint& foot = pts[np - 1];
    double F;
    if (hit) {
      const double w1 = (dt - foot.back) / dt;
      F = wall_amplitude(foot.x, w1) * maxwellian(v_foot);
    } else {
      Stencil8 s;
      stencil(foot.x, s);
      if (phi == nullptr) {
        F = gather_F(Fs, s, j);
      } else {
        VelocityGrid::Stencil vs;
        vg->stencil(v_foot, vs);
        F = 0.0;
        for (int k = 0; k < vs.count; ++k) F += vs.weight[k] * gather_F(Fs, s, static_cast<std::size_t>(vs.index[k]));
      }
    }
    if (!opt.collisions || np < 2) return F;

    Stencil8 s;
    double nu_prev, g_prev;
    stencil(foot.x, s);
    gather_cache(s, j, (dt - foot.back) / dt, nu_prev, g_prev);
    for (int k = np - 2; k >= 0; --k) {
      double nu, g;
      stencil(pts[k].x, s);
      gather_cache(s, j, (dt - pts[k].back) / dt, nu, g);
      const double len = pts[k + 1].back - pts[k].back;
      const double nb = 0.5 * (nu + nu_prev), gb = 0.5 * (g + g_prev);
      const double a = nb * len;
      const double e = std::exp(-a);
      const double phi1 = a > 1e-4 ? (1.0 - e) / a : 1.0 - a * (0.5 - a / 6.0);
      F = F * e + gb * len * phi1;
      nu_prev = nu;
      g_prev = g;
    }
    return F;
  }

  void sweep(const DistributionField& Fs, const PotentialField* phi, double dt, std::vector<double>& out) {
    std::optional<NodalField> nodal;
    if (phi != nullptr && !phi->negligible()) nodal.emplace(*phi);
    const NodalField* ph = nodal ? &*nodal : nullptr;
    out.resize(ns * nv);
    const double* fs = Fs.data().data();
    parallel_for(nv, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        for (std::size_t i = 0; i < ns; ++i) out[j * ns + i] = trace_value(sp->interior_position(i), j, fs, ph, dt);
        for (std::size_t s = 0; s < st.size(); ++s)
          if (st[s].normal.dot(vnode[j]) > 0.0) st_out[s][j] = trace_value(st[s].position, j, fs, ph, dt);
      }
    });
    if (opt.mass_fix) {
      // interpolation near the wall is not conservative; restore the mass of the step start
      const double m_out = phase_mass(out.data());
      if (m_out > 0.0) {
        const double r = phase_mass(fs) / m_out;
        for (double& x : out) x *= r;
        for (auto& row : st_out)
          for (double& x : row) x *= r;
      }
    }
  }

  double phase_mass(const double* F) const {
    const auto& w = sp->mass_weight();
    std::vector<double> per(ns);
    parallel_for(ns, [&](std::size_t b, std::size_t e) {
      std::vector<double> col(nv);
      for (std::size_t i = b; i < e; ++i) {
        for (std::size_t j = 0; j < nv; ++j) col[j] = F[j * ns + i];
        per[i] = w[i] * vg->integrate(col);
      }
    });
    return pairwise_sum(per);
  }

  void record_positivity(const std::vector<double>& F) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : F) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double ratio = hi > 0.0 ? lo / hi : 0.0;
    min_ratio = std::min(min_ratio, ratio);
    if (!(lo >= -1e-12 * hi)) throw NegativeValue("negative distribution value " + std::to_string(lo));
  }

  void initialize(const DistributionField& F) {
    const double* f = F.data().data();
    for (std::size_t s = 0; s < st.size(); ++s) {
      const Vec3 q = (st[s].position - sp->origin()).cwiseQuotient(sp->h());
      int c[3];
      for (int d = 0; d < 3; ++d) c[d] = std::clamp(static_cast<int>(std::lround(q[d])), 0, sp->dim() - 1);
      const std::size_t b = sp->box_index(c[0], c[1], c[2]);
      int i = sp->interior_index(b);
      if (i < 0) i = sp->nearest_interior(b);
      if (i < 0) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ns; ++k) {
          const double d = (sp->interior_position(k) - st[s].position).squaredNorm();
          if (d < best) best = d, i = static_cast<int>(k);
        }
      }
      for (std::size_t j = 0; j < nv; ++j) st_out[s][j] = f[j * ns + i];
    }
    bc_update();
    amp_start = amp_end;
    refresh_ghost_amp();
    t_wall = F.time;
    initialized = true;
  }
};

Solver::Solver(std::shared_ptr<const SpatialGrid> space, std::shared_ptr<const VelocityGrid> velocity,
               SolverOptions opt)
    : impl_(std::make_unique<Impl>(std::move(space), std::move(velocity), opt)) {}

Solver::~Solver() = default;

const SpatialGrid& Solver::space() const { return *impl_->sp; }
const VelocityGrid& Solver::velocity() const { return *impl_->vg; }
const SolverOptions& Solver::options() const { return impl_->opt; }
const std::vector<SurfacePoint>& Solver::stations() const { return impl_->st; }
const std::vector<double>& Solver::station_flux() const { return impl_->flux; }
const std::vector<double>& Solver::station_amplitude() const { return impl_->amp_end; }
const std::vector<double>& Solver::station_residual() const { return impl_->resid; }
double Solver::half_space_error() const { return impl_->hs_err; }
double Solver::min_positivity_ratio() const { return impl_->min_ratio; }

void Solver::initialize(const DistributionField& F) { impl_->initialize(F); }

void Solver::restore_wall(std::span<const double> amplitude) {
  Impl& m = *impl_;
  if (amplitude.size() != m.st.size()) throw GridMismatch("wall amplitudes do not match the stations");
  m.amp_start.assign(amplitude.begin(), amplitude.end());
  m.amp_end = m.amp_start;
  m.refresh_ghost_amp();
}

static void check_same_grids(const Solver& s, const DistributionField& F) {
  if (!F.space().same_as(s.space()) || !(F.velocity() == s.velocity()))
    throw GridMismatch("distribution field does not match the solver grids");
}

DistributionField Solver::duhamel_step(const DistributionField& F_prev, const PotentialField& phi,
                                       const DistributionField& F_start, double dt) {
  Impl& m = *impl_;
  check_same_grids(*this, F_prev);
  check_same_grids(*this, F_start);
  if (!m.initialized) m.initialize(F_start);
  m.record_positivity(F_prev.data());
  m.record_positivity(F_start.data());
  m.compute_cache(F_start.data(), 0);
  m.compute_cache(F_prev.data(), 1);
  m.amp_end = m.amp_start;
  DistributionField out(F_start.space_ptr(), F_start.velocity_ptr(), F_start.time + dt);
  m.sweep(F_start, &phi, dt, out.data());
  m.record_positivity(out.data());
  return out;
}

PicardResult Solver::picard_iterate(const DistributionField& F_start, double dt, double tol, int max_iter) {
  Impl& m = *impl_;
  check_same_grids(*this, F_start);
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!m.initialized) m.initialize(F_start);
  m.record_positivity(F_start.data());
  m.compute_cache(F_start.data(), 0);
  m.copy_cache_slot0_to_1();
  m.amp_end = m.amp_start;
  const double t1 = F_start.time + dt;

  PicardResult res{F_start, PotentialField::zero(F_start.space_ptr(), t1), 0, {}};
  std::vector<double> next;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    IterateRecord rec;
    const DensityDeviation dev = density_from_f(res.F);
    rec.neutral_mean = dev.pre_projection_mean;
    res.phi = solve_poisson(F_start.space_ptr(), dev, m.opt.poisson, nullptr, t1);
    if (it > 1) m.compute_cache(res.F.data(), 1);
    m.sweep(F_start, &res.phi, dt, next);
    m.record_positivity(next);
    rec.min_ratio = m.min_ratio;
    rec.null_flux_max = m.bc_update();
    double diff = 0.0, sup = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      diff = std::max(diff, std::abs(next[k] - res.F.data()[k]));
      sup = std::max(sup, next[k]);
    }
    rec.difference = diff;
    res.F.data().swap(next);
    res.F.time = t1;
    res.iterations = it;
    res.records.push_back(rec);
    last = diff;
    if (diff <= tol * (1.0 + sup)) {
      m.amp_start = m.amp_end;
      m.refresh_ghost_amp();
      m.t_wall = t1;
      return res;
    }
  }
  throw NotConverged(max_iter, last);
}

DistributionField initial_data(std::shared_ptr<const SpatialGrid> space, std::shared_ptr<const VelocityGrid> velocity,
                               const InitSpec& init) {
  DistributionField F = DistributionField::maxwellian(space, velocity, 0.0);
  if (init.kind == "maxwellian" && init.offset == 0.0) return F;
  const SpatialGrid& g = *space;
  const VelocityGrid& vg = *velocity;
  const Box& bb = g.domain().bbox();
  const Vec3 c = 0.5 * (bb.lo + bb.hi);
  const Vec3 half = 0.5 * (bb.hi - bb.lo);
  const double A = init.kind == "perturbed" ? init.amplitude : 0.0;
  const bool dens = init.mode == "density" || init.mode == "mixed";
  const bool flow = init.mode == "flow" || init.mode == "mixed";
  const bool therm = init.mode == "thermal" || init.mode == "mixed";
  const std::size_t ns = g.n_interior();
  for (std::size_t j = 0; j < vg.size(); ++j) {
    const Vec3 v = vg.node(j);
    const double mu = vg.mu()[j];
    for (std::size_t i = 0; i < ns; ++i) {
      const Vec3 y = (g.interior_position(i) - c).cwiseQuotient(half);
      const double s = std::sin(0.5 * kPi * y[0]);
      double p = 0.0;
      if (dens) p += s;
      if (flow) p += std::cos(0.5 * kPi * y[0]) * v[1];
      if (therm) p += s * 0.5 * (v.squaredNorm() - 3.0);
      p = A * p + init.offset * s;
      F.at(j, i) = std::max(0.0, mu * (1.0 + p));
    }
  }
  // discrete neutrality: same mass as the equilibrium on this grid
  const double m = total_mass(F);
  if (m > 0.0) {
    const double r = total_mass(DistributionField::maxwellian(space, velocity)) / m;
    for (double& x : F.data()) x *= r;
  }
  return F;
}

std::shared_ptr<const SpatialGrid> make_spatial_grid(const RunConfig& c) {
  return std::make_shared<const SpatialGrid>(make_domain(c.domain.shape, c.domain.semi_axes), c.grid.n_x);
}

std::shared_ptr<const VelocityGrid> make_velocity_grid(const RunConfig& c) {
  return std::make_shared<const VelocityGrid>(c.grid.v_max, c.grid.n_v);
}

namespace {

DiagRow make_row(const DistributionField& F, const PotentialField& phi, double theta, double null_flux, int iters) {
  const PerturbationField f = to_perturbation(F, theta);
  DiagRow r;
  r.t = F.time;
  r.mass = total_mass(F);
  r.sup_wf = weighted_sup_norm(f, theta);
  r.l2_f = l2_norm(f);
  r.grad_phi_sup = phi.max_field();
  r.null_flux_max = null_flux;
  r.picard_iterations = iters;
  return r;
}

}  // namespace

RunResult time_march(const RunConfig& config, const RunOptions& ro) {
  validate_config(config);
  set_thread_count(config.threads);
  RunResult run;
  run.config = config;
  auto space = make_spatial_grid(config);
  auto velocity = make_velocity_grid(config);
  run.dt = config.march.dt > 0.0 ? config.march.dt : default_time_step(*space, *velocity);
  SolverOptions so;
  so.collisions = config.physics.collisions;
  so.surface_order = config.grid.surface_order;
  so.poisson = {config.march.poisson_tol, config.march.poisson_max_iter};
  Solver solver(space, velocity, so);
  run.half_space_error = solver.half_space_error();

  DistributionField F = initial_data(space, velocity, config.init);
  solver.initialize(F);
  PotentialField phi = solve_poisson(space, density_from_f(F), so.poisson, nullptr, 0.0);
  if (!(config.physics.epsilon > 2.0 * phi.max_field()))
    throw ConstraintViolation("epsilon > 2 sup|grad phi_0|");
  run.history = std::make_shared<FieldHistory>(space->domain());
  run.history->push(std::make_shared<const PotentialField>(phi));

  const int snap_every = ro.snapshot_every >= 0 ? ro.snapshot_every : config.io.snapshot_every;
  const std::filesystem::path out = config.io.out_dir;
  std::ofstream diag, w1p_csv;
  if (ro.write_files) {
    std::filesystem::create_directories(out);
    diag.open(out / "diag.csv");
    diag << diag_csv_header() << "\n";
    w1p_csv.open(out / "w1p.csv");
    w1p_csv << "t,w1p\n";
    std::ofstream(out / "config.yaml") << to_yaml(config);
  }
  const W1pOptions w1p_opt{config.physics.theta_tilde, config.physics.epsilon};
  auto emit = [&](DiagRow row, int step) {
    const bool do_w1p = config.io.w1p_every > 0 && step % config.io.w1p_every == 0;
    if (do_w1p) {
      row.w1p = alpha_weighted_w1p(to_perturbation(F, config.physics.theta), *run.history, config.physics.beta,
                                   config.physics.p, w1p_opt);
    }
    if (ro.write_files) {
      diag << diag_csv_line(row) << "\n" << std::flush;
      if (do_w1p) w1p_csv << format_double(row.t) << "," << format_double(row.w1p) << "\n" << std::flush;
    }
    const bool snap = snap_every > 0 && step % snap_every == 0;
    if (snap && ro.keep_snapshots) run.snapshots.push_back(to_perturbation(F, config.physics.theta));
    if (snap && ro.write_files) {
      char name[64];
      std::snprintf(name, sizeof name, "f_step%06d", step);
      write_distribution_snapshot(F, out / name);
      std::snprintf(name, sizeof name, "phi_step%06d", step);
      write_potential_snapshot(phi, out / name);
    }
    run.rows.push_back(row);
  };

  double resid0 = 0.0;
  for (double r : solver.station_residual()) resid0 = std::max(resid0, std::abs(r));
  emit(make_row(F, phi, config.physics.theta, resid0, 0), 0);

  const double t_end = config.march.t_end;
  int step = 0;
  while (F.time < t_end - 1e-12 * std::max(1.0, t_end)) {
    ++step;
    const double dt = std::min(run.dt, t_end - F.time);
    std::optional<PicardResult> opr;
    try {
      opr.emplace(solver.picard_iterate(F, dt, config.march.picard_tol, config.march.picard_max_iter));
    } catch (const NumericalError&) {
      std::throw_with_nested(NumericalError("time step " + std::to_string(step) + " failed"));
    }
    PicardResult& pr = *opr;
    F = std::move(pr.F);
    phi = pr.phi;
    run.history->push(std::make_shared<const PotentialField>(phi));
    double nf = 0.0, fl = 0.0;
    for (double r : solver.station_residual()) nf = std::max(nf, std::abs(r));
    for (double x : solver.station_flux()) fl = std::max(fl, std::abs(x));
    if (fl > 0.0) run.max_null_flux_ratio = std::max(run.max_null_flux_ratio, nf / fl);
    for (const auto& rec : pr.records) run.max_neutral_mean = std::max(run.max_neutral_mean, std::abs(rec.neutral_mean));
    run.max_picard_iterations = std::max(run.max_picard_iterations, pr.iterations);
    emit(make_row(F, phi, config.physics.theta, nf, pr.iterations), step);
  }
  run.min_positivity_ratio = std::min(1.0, solver.min_positivity_ratio());
  run.final_state = std::make_unique<DistributionField>(std::move(F));
  return run;
}

}  // namespace vpb
