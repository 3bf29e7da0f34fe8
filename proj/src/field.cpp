#include "vpb/field.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "vpb/errors.hpp"
#include "vpb/parallel.hpp"

namespace vpb {

DistributionField::DistributionField(std::shared_ptr<const SpatialGrid> space,
                                     std::shared_ptr<const VelocityGrid> velocity, double t)
    : time(t),
      space_(std::move(space)),
      velocity_(std::move(velocity)),
      ns_(space_->n_interior()),
      nv_(velocity_->size()),
      data_(ns_ * nv_, 0.0) {}

DistributionField DistributionField::maxwellian(std::shared_ptr<const SpatialGrid> space,
                                                std::shared_ptr<const VelocityGrid> velocity, double t) {
  DistributionField F(std::move(space), std::move(velocity), t);
  const auto& mu = F.velocity().mu();
  for (std::size_t j = 0; j < F.nv_; ++j) std::fill_n(F.data_.begin() + j * F.ns_, F.ns_, mu[j]);
  return F;
}

std::vector<double> DistributionField::slice(std::size_t i) const {
  std::vector<double> s(nv_);
  for (std::size_t j = 0; j < nv_; ++j) s[j] = data_[j * ns_ + i];
  return s;
}

DensityDeviation density_from_f(const DistributionField& F) {
  const std::size_t ns = F.n_space(), nv = F.n_velocity();
  const auto& mu = F.velocity().mu();
  DensityDeviation dev;
  dev.values.assign(ns, 0.0);
  parallel_for(ns, [&](std::size_t b, std::size_t e) {
    std::vector<double> col(nv);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < nv; ++j) col[j] = F.at(j, i) - mu[j];
      dev.values[i] = F.velocity().integrate(col);
    }
  });
  const auto& w = F.space().mass_weight();
  std::vector<double> wv(ns);
  for (std::size_t i = 0; i < ns; ++i) wv[i] = w[i] * dev.values[i];
  const double mean = pairwise_sum(wv) / F.space().volume();
  dev.pre_projection_mean = mean;
  for (double& v : dev.values) v -= mean;
  return dev;
}

namespace {

inline void catmull_rom(double t, double w[4], double dw[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
  dw[0] = 0.5 * (-3 * t2 + 4 * t - 1);
  dw[1] = 0.5 * (9 * t2 - 10 * t);
  dw[2] = 0.5 * (-9 * t2 + 8 * t + 1);
  dw[3] = 0.5 * (3 * t2 - 2 * t);
}

}  // namespace

PotentialField::PotentialField(std::shared_ptr<const SpatialGrid> grid, std::vector<double> box_values,
                               double time_stamp)
    : grid_(std::move(grid)), values_(std::move(box_values)), time_(time_stamp) {
  if (values_.size() != grid_->box_size()) throw GridMismatch("potential values do not match the grid");
  double m = 0.0;
  bool any = false;
  for (double v : values_)
    if (v != 0.0) {
      any = true;
      break;
    }
  if (any)
    for (std::size_t i = 0; i < grid_->n_interior(); ++i)
      m = std::max(m, field(grid_->interior_position(i)).norm());
  max_field_ = m;
}

PotentialField PotentialField::zero(std::shared_ptr<const SpatialGrid> grid, double time_stamp) {
  const std::size_t n = grid->box_size();
  return PotentialField(std::move(grid), std::vector<double>(n, 0.0), time_stamp);
}

std::vector<double> PotentialField::interior_values() const {
  std::vector<double> v(grid_->n_interior());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[grid_->interior_nodes()[i]];
  return v;
}

double PotentialField::mean() const {
  const auto& vf = grid_->volume_fraction();
  std::vector<double> a, w;
  for (std::size_t b = 0; b < values_.size(); ++b)
    if (vf[b] > 0.0) {
      a.push_back(vf[b] * values_[b]);
      w.push_back(vf[b]);
    }
  return pairwise_sum(a) / pairwise_sum(w);
}

double PotentialField::potential(const Vec3& x) const {
  const SpatialGrid& g = *grid_;
  const Vec3 s = (x - g.origin()).cwiseQuotient(g.h());
  int base[3];
  double w[3][4], dw[3][4];
  for (int d = 0; d < 3; ++d) {
    const double fl = std::floor(s[d]);
    base[d] = static_cast<int>(fl);
    if (base[d] < 1 || base[d] + 2 >= g.dim()) throw OutsideDomain("point outside the field grid");
    catmull_rom(s[d] - fl, w[d], dw[d]);
  }
  double r = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const std::size_t row = g.box_index(base[0] - 1 + a, base[1] - 1 + b, base[2] - 1);
      for (int c = 0; c < 4; ++c) r += w[0][a] * w[1][b] * w[2][c] * values_[row + c];
    }
  return r;
}

Vec3 PotentialField::raw_gradient(const Vec3& x) const {
  const SpatialGrid& g = *grid_;
  const Vec3 s = (x - g.origin()).cwiseQuotient(g.h());
  int base[3];
  double w[3][4], dw[3][4];
  for (int d = 0; d < 3; ++d) {
    const double fl = std::floor(s[d]);
    base[d] = static_cast<int>(fl);
    if (!(base[d] >= 1 && base[d] + 2 < g.dim())) throw OutsideDomain("point outside the field grid");
    catmull_rom(s[d] - fl, w[d], dw[d]);
  }
  double gx = 0, gy = 0, gz = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const std::size_t row = g.box_index(base[0] - 1 + a, base[1] - 1 + b, base[2] - 1);
      double s0 = 0, s1 = 0;
      for (int c = 0; c < 4; ++c) {
        const double v = values_[row + c];
        s0 += w[2][c] * v;
        s1 += dw[2][c] * v;
      }
      gx += dw[0][a] * w[1][b] * s0;
      gy += w[0][a] * dw[1][b] * s0;
      gz += w[0][a] * w[1][b] * s1;
    }
  return {gx / g.h()[0], gy / g.h()[1], gz / g.h()[2]};
}

Vec3 PotentialField::field(const Vec3& x) const {
  Vec3 E = -raw_gradient(x);
  const ConvexDomain& dom = grid_->domain();
  const Vec3 gl = dom.grad_level(x);
  const double gn = gl.norm();
  if (gn > 1e-12) {
    const double d = -dom.level(x) / gn;
    const double layer = grid_->h_max();
    if (d < layer) {
      const double w = d <= 0.0 ? 1.0 : 1.0 - d / layer;
      const Vec3 n = gl / gn;
      E -= w * n.dot(E) * n;
    }
  }
  return E;
}

Mat3 PotentialField::field_gradient(const Vec3& x) const {
  const double d = 1e-5 * grid_->h_max();
  Mat3 J;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = d;
    J.col(k) = (field(x + e) - field(x - e)) / (2 * d);
  }
  return J;
}

PotentialField PotentialField::scaled(double factor, double time_stamp) const {
  std::vector<double> v(values_);
  for (double& a : v) a *= factor;
  PotentialField p(grid_, std::vector<double>(values_.size(), 0.0), time_stamp);
  p.values_ = std::move(v);
  p.max_field_ = max_field_ * std::abs(factor);
  return p;
}

PotentialField solve_poisson(std::shared_ptr<const SpatialGrid> grid_ptr, const DensityDeviation& dev,
                             const PoissonOptions& opts, PoissonReport* report, double time_stamp) {
  const SpatialGrid& g = *grid_ptr;
  if (dev.values.size() != g.n_interior()) throw GridMismatch("density deviation does not match the grid");
  const auto& vf = g.volume_fraction();
  const std::size_t nb = g.box_size();
  std::vector<int> unk(nb, -1);
  std::vector<std::size_t> cells;
  for (std::size_t b = 0; b < nb; ++b)
    if (vf[b] > 1e-12) {
      unk[b] = static_cast<int>(cells.size());
      cells.push_back(b);
    }
  const std::size_t n = cells.size();
  const double cv = g.cell_volume();

  Eigen::VectorXd rhs(n), vol(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t b = cells[c];
    int idx = g.interior_index(b) >= 0 ? g.interior_index(b) : g.nearest_interior(b);
    const double s = idx >= 0 ? dev.values[idx] : 0.0;
    vol[c] = vf[b] * cv;
    rhs[c] = s;
  }
  const double smean = rhs.dot(vol) / vol.sum();
  rhs = ((rhs.array() - smean) * vol.array()).matrix();

  if (report) *report = {0, 0.0, n};
  std::vector<double> box(nb, 0.0);
  if (rhs.lpNorm<Eigen::Infinity>() == 0.0) return PotentialField(grid_ptr, std::move(box), time_stamp);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(7 * n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  const Vec3& h = g.h();
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t b = cells[c];
    int i[3];
    g.unpack(b, i[0], i[1], i[2]);
    for (int a = 0; a < 3; ++a) {
      if (i[a] + 1 >= g.dim()) continue;
      int j[3] = {i[0], i[1], i[2]};
      j[a] += 1;
      const std::size_t nbx = g.box_index(j[0], j[1], j[2]);
      if (unk[nbx] < 0) continue;
      const double area = h[(a + 1) % 3] * h[(a + 2) % 3];
      const double T = g.aperture(a)[b] * area / h[a];
      if (T <= 0.0) continue;
      const int cn = unk[nbx];
      trip.emplace_back(c, cn, -T);
      trip.emplace_back(cn, c, -T);
      diag[c] += T;
      diag[cn] += T;
    }
  }
  for (std::size_t c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c] > 0 ? diag[c] : 1.0);
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(opts.tol);
  cg.setMaxIterations(opts.max_iter);
  cg.compute(A);
  Eigen::VectorXd phi = cg.solve(rhs);
  const double rel = (A * phi - rhs).norm() / rhs.norm();
  if (report) {
    report->iterations = static_cast<int>(cg.iterations());
    report->relative_residual = rel;
  }
  if (!std::isfinite(rel) || rel > 1e-8)
    throw SolverDiverged("Poisson residual " + std::to_string(rel) + " above tolerance");
  phi.array() -= phi.dot(vol) / vol.sum();

  std::vector<char> known(nb, 0);
  for (std::size_t c = 0; c < n; ++c) {
    box[cells[c]] = phi[c];
    known[cells[c]] = 1;
  }

  // even extension across the wall, nearest layers first
  const ConvexDomain& dom = g.domain();
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t b = 0; b < nb; ++b)
    if (!known[b]) order.emplace_back(dom.distance_to_boundary(g.node(b)), b);
  std::sort(order.begin(), order.end());
  for (const auto& [dist, b] : order) {
    const Vec3 x = g.node(b);
    const Vec3 m = 2.0 * dom.project(x) - x;
    const Vec3 s = (m - g.origin()).cwiseQuotient(h);
    int base[3];
    double fr[3];
    for (int d = 0; d < 3; ++d) {
      const double fl = std::floor(s[d]);
      base[d] = std::clamp(static_cast<int>(fl), 0, g.dim() - 2);
      fr[d] = std::clamp(s[d] - base[d], 0.0, 1.0);
    }
    double acc = 0.0, wsum = 0.0;
    for (int c = 0; c < 8; ++c) {
      const std::size_t nbx = g.box_index(base[0] + (c & 1), base[1] + ((c >> 1) & 1), base[2] + ((c >> 2) & 1));
      if (!known[nbx]) continue;
      const double w = ((c & 1) ? fr[0] : 1 - fr[0]) * (((c >> 1) & 1) ? fr[1] : 1 - fr[1]) *
                       (((c >> 2) & 1) ? fr[2] : 1 - fr[2]);
      acc += w * box[nbx];
      wsum += w;
    }
    if (wsum > 1e-12) {
      box[b] = acc / wsum;
    } else {
      const int ni = g.nearest_interior(b);
      box[b] = ni >= 0 ? box[g.interior_nodes()[ni]] : 0.0;
    }
    known[b] = 1;
  }
  return PotentialField(grid_ptr, std::move(box), time_stamp);
}

Vec3 eval_field(const PotentialField& phi, const Vec3& x) {
  const ConvexDomain& dom = phi.grid().domain();
  if (dom.level(x) > 1e-8 * (1.0 + dom.grad_level(x).norm()))
    throw OutsideDomain("eval_field called outside the closure of the domain");
  return phi.field(x);
}

PotentialField extend_negative_time(const PotentialField& phi0, double t) {
  if (t > 0.0) throw ConfigError("extend_negative_time needs t <= 0");
  return phi0.scaled(std::exp(-std::abs(t)), t);
}

}  // namespace vpb
