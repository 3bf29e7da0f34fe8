#include "vpb/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include "vpb/errors.hpp"
#include "vpb/parallel.hpp"
#include "vpb/special.hpp"

namespace vpb {

double WeightParams::chi(double tau) const { return smoothstep5(tau); }

FieldHistory::FieldHistory(ConvexDomain domain) : domain_(std::move(domain)) {}

FieldHistory FieldHistory::analytic(ConvexDomain domain, AnalyticE E, AnalyticGradE gradE) {
  FieldHistory h(std::move(domain));
  h.analytic_ = std::move(E);
  h.analytic_grad_ = std::move(gradE);
  return h;
}

void FieldHistory::push(std::shared_ptr<const PotentialField> phi) {
  if (analytic_) throw ConfigError("cannot push snapshots into an analytic field history");
  if (!snaps_.empty() && !(phi->time_stamp() > snaps_.back()->time_stamp()))
    throw ConfigError("field snapshots must have strictly increasing time stamps");
  snaps_.push_back(std::move(phi));
}

void FieldHistory::bracket(double t, int& k0, int& k1, double& w0, double& w1) const {
  k0 = k1 = -1;
  w0 = w1 = 0.0;
  if (snaps_.empty()) return;
  const double t0 = snaps_.front()->time_stamp();
  if (t <= t0) {
    k0 = 0;
    w0 = std::exp(-(t0 - t));
    return;
  }
  if (t >= snaps_.back()->time_stamp()) {
    k0 = static_cast<int>(snaps_.size()) - 1;
    w0 = 1.0;
    return;
  }
  auto it = std::upper_bound(snaps_.begin(), snaps_.end(), t,
                             [](double tt, const auto& s) { return tt < s->time_stamp(); });
  k1 = static_cast<int>(it - snaps_.begin());
  k0 = k1 - 1;
  const double a = snaps_[k0]->time_stamp(), b = snaps_[k1]->time_stamp();
  w1 = (t - a) / (b - a);
  w0 = 1.0 - w1;
}

Vec3 FieldHistory::field(double t, const Vec3& x) const {
  if (analytic_) return analytic_(t, x);
  int k0, k1;
  double w0, w1;
  bracket(t, k0, k1, w0, w1);
  Vec3 E = Vec3::Zero();
  if (k0 >= 0 && w0 != 0.0 && !snaps_[k0]->negligible()) E += w0 * snaps_[k0]->field(x);
  if (k1 >= 0 && w1 != 0.0 && !snaps_[k1]->negligible()) E += w1 * snaps_[k1]->field(x);
  return E;
}

Mat3 FieldHistory::field_gradient(double t, const Vec3& x) const {
  if (analytic_) {
    if (analytic_grad_) return analytic_grad_(t, x);
    const double d = 1e-6;
    Mat3 J;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = d;
      J.col(k) = (analytic_(t, x + e) - analytic_(t, x - e)) / (2 * d);
    }
    return J;
  }
  int k0, k1;
  double w0, w1;
  bracket(t, k0, k1, w0, w1);
  Mat3 J = Mat3::Zero();
  if (k0 >= 0 && w0 != 0.0 && !snaps_[k0]->negligible()) J += w0 * snaps_[k0]->field_gradient(x);
  if (k1 >= 0 && w1 != 0.0 && !snaps_[k1]->negligible()) J += w1 * snaps_[k1]->field_gradient(x);
  return J;
}

bool FieldHistory::negligible_on(double t0, double t1) const {
  if (analytic_) return false;
  if (snaps_.empty()) return true;
  if (t0 > t1) std::swap(t0, t1);
  int a0, a1, b0, b1;
  double w0, w1;
  bracket(t0, a0, a1, w0, w1);
  bracket(t1, b0, b1, w0, w1);
  const int lo = a0, hi = std::max(b0, b1);
  for (int k = lo; k <= hi; ++k)
    if (k >= 0 && !snaps_[k]->negligible()) return false;
  return true;
}

double default_step(const Vec3& v) { return std::min(0.01, 0.1 / (1.0 + v.norm())); }

PhasePoint rk4_step(const FieldHistory& H, const PhasePoint& p, double dt) {
  const double t = p.t;
  const Vec3 k1x = p.v, k1v = H.field(t, p.x);
  const Vec3 x2 = p.x + 0.5 * dt * k1x, v2 = p.v + 0.5 * dt * k1v;
  const Vec3 k2x = v2, k2v = H.field(t + 0.5 * dt, x2);
  const Vec3 x3 = p.x + 0.5 * dt * k2x, v3 = p.v + 0.5 * dt * k2v;
  const Vec3 k3x = v3, k3v = H.field(t + 0.5 * dt, x3);
  const Vec3 x4 = p.x + dt * k3x, v4 = p.v + dt * k3v;
  const Vec3 k4x = v4, k4v = H.field(t + dt, x4);
  PhasePoint r;
  r.t = t + dt;
  r.x = p.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  r.v = p.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  return r;
}

namespace {

struct PathResult {
  bool exited = false;
  double travel = 0.0;
  PhasePoint state;
};

// Follow the characteristic in direction dir (+1 forward, -1 backward) for
// at most `length` time units, stopping at the first wall crossing.
PathResult integrate_path(const PhasePoint& p, const FieldHistory& H, int dir, double length,
                          const IntegratorOptions& opt) {
  const ConvexDomain& dom = H.domain();
  PathResult res;
  res.state = p;
  if (dom.level(p.x) >= -dom.boundary_tolerance(p.x)) {
    const Vec3 g = dom.grad_level(p.x);
    if (g.norm() > 1e-12 && dir * g.dot(p.v) >= 0.0 && p.v.squaredNorm() > 0.0) {
      res.exited = true;
      return res;
    }
  }
  if (length <= 0.0) return res;
  const double t_end = p.t + dir * length;
  if (dom.is_quadric() && H.negligible_on(p.t, t_end)) {
    if (p.v.squaredNorm() == 0.0) {
      res.state.t = t_end;
      return res;
    }
    const Vec3 d = dir * p.v;
    const auto c = dom.chord(p.x, d);
    const double s1 = c ? std::max(0.0, c->second) : 0.0;
    if (s1 >= length) {
      res.state = {t_end, p.x + length * d, p.v};
      return res;
    }
    res.exited = true;
    res.travel = s1;
    res.state = {p.t + dir * s1, p.x + s1 * d, p.v};
    return res;
  }
  const double h = opt.step > 0.0 ? opt.step : default_step(p.v);
  const int n = std::max(1, static_cast<int>(std::ceil(length / h - 1e-12)));
  const double dt = dir * length / n;
  PhasePoint cur = p;
  for (int i = 0; i < n; ++i) {
    const PhasePoint next = rk4_step(H, cur, dt);
    if (dom.level(next.x) > 0.0) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < opt.bisection_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dom.level(rk4_step(H, cur, mid * dt).x) > 0.0)
          hi = mid;
        else
          lo = mid;
      }
      const double frac = 0.5 * (lo + hi);
      res.exited = true;
      res.state = rk4_step(H, cur, frac * dt);
      res.travel = std::abs(res.state.t - p.t);
      return res;
    }
    cur = next;
  }
  cur.t = t_end;
  res.state = cur;
  res.travel = length;
  return res;
}

}  // namespace

PhasePoint trace(const PhasePoint& p, const FieldHistory& H, double s, const IntegratorOptions& opt) {
  if (s == p.t) return p;
  const int dir = s > p.t ? 1 : -1;
  const double len = std::abs(s - p.t);
  const ConvexDomain& dom = H.domain();
  if (dom.level(p.x) > dom.boundary_tolerance(p.x)) throw LeftDomain(p.t);
  // a start exactly on the wall heading out leaves immediately
  PathResult r = integrate_path(p, H, dir, len, opt);
  if (r.exited && r.travel < len * (1.0 - 1e-12)) throw LeftDomain(r.state.t);
  if (r.exited) r.state.t = s;
  return r.state;
}

BackwardExit backward_exit(const PhasePoint& p, const FieldHistory& H, double horizon,
                           const IntegratorOptions& opt) {
  const PathResult r = integrate_path(p, H, -1, horizon, opt);
  BackwardExit be;
  be.hit = r.exited;
  be.t_b = r.exited ? r.travel : horizon;
  be.x_b = r.state.x;
  be.v_b = r.state.v;
  return be;
}

ForwardExit forward_exit(const PhasePoint& p, const FieldHistory& H, double horizon,
                         const IntegratorOptions& opt) {
  const PathResult r = integrate_path(p, H, +1, horizon, opt);
  ForwardExit fe;
  fe.hit = r.exited;
  fe.t_b = r.exited ? r.travel : horizon;
  fe.x_b = r.state.x;
  fe.v_b = r.state.v;
  return fe;
}

KineticWeight kinetic_weight_ex(const PhasePoint& p, const FieldHistory& H, const WeightParams& w,
                                const IntegratorOptions& opt) {
  KineticWeight kw;
  const double horizon = p.t + w.epsilon;
  if (horizon <= 0.0) return kw;
  kw.exit = backward_exit(p, H, horizon, opt);
  if (!kw.exit.hit) return kw;
  const double chi = w.chi((p.t - kw.exit.t_b + w.epsilon) / w.epsilon);
  const double nv = std::abs(normal(H.domain(), kw.exit.x_b).dot(kw.exit.v_b));
  kw.value = chi * nv + (1.0 - chi);
  kw.grazing = chi > 0.0 && nv < kGrazingCutoff;
  return kw;
}

double kinetic_weight(const PhasePoint& p, const FieldHistory& H, const WeightParams& w,
                      const IntegratorOptions& opt) {
  return kinetic_weight_ex(p, H, w, opt).value;
}

VariationalResult variational_jacobian(const PhasePoint& p, const FieldHistory& H, double s,
                                       const IntegratorOptions& opt) {
  VariationalResult res;
  res.jacobian.setIdentity();
  res.end = p;
  if (s == p.t) return res;
  const ConvexDomain& dom = H.domain();
  const int dir = s > p.t ? 1 : -1;
  const double len = std::abs(s - p.t);
  const double h = opt.step > 0.0 ? opt.step : default_step(p.v);
  const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-12)));
  const double dt = dir * len / n;

  struct Y {
    Vec3 x, v;
    Mat6 J;
  };
  auto rhs = [&](double t, const Y& y) {
    Y d;
    d.x = y.v;
    d.v = H.field(t, y.x);
    const Mat3 G = H.field_gradient(t, y.x);
    d.J.topRows<3>() = y.J.bottomRows<3>();
    d.J.bottomRows<3>() = G * y.J.topRows<3>();
    return d;
  };
  auto axpy = [](const Y& a, double c, const Y& b) { return Y{a.x + c * b.x, a.v + c * b.v, a.J + c * b.J}; };
  Y y{p.x, p.v, Mat6::Identity()};
  double t = p.t;
  for (int i = 0; i < n; ++i) {
    const Y k1 = rhs(t, y);
    const Y k2 = rhs(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    const Y k3 = rhs(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    const Y k4 = rhs(t + dt, axpy(y, dt, k3));
    y.x += dt / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    y.v += dt / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    y.J += dt / 6.0 * (k1.J + 2 * k2.J + 2 * k3.J + k4.J);
    t += dt;
    if (dom.level(y.x) > dom.boundary_tolerance(y.x)) throw LeftDomain(t);
  }
  res.end = {s, y.x, y.v};
  res.jacobian = y.J;
  return res;
}

ExitMapJacobian exit_map_jacobian(const PhasePoint& p, const FieldHistory& H, double horizon) {
  IntegratorOptions opt;
  opt.step = default_step(p.v);
  ExitMapJacobian r;
  r.exit = backward_exit(p, H, horizon, opt);
  if (!r.exit.hit) throw NearGrazing("no backward exit within the horizon");
  const Vec3 n = normal(H.domain(), r.exit.x_b);
  const double nv = std::abs(n.dot(r.exit.v_b));
  if (nv < kGrazingCutoff) throw NearGrazing("backward exit is grazing");
  Vec3 e1, e2;
  tangent_basis(n, e1, e2);
  const double delta = 1e-5 * std::max(1.0, p.v.norm());
  Mat3 M;
  for (int k = 0; k < 3; ++k) {
    PhasePoint pp = p, pm = p;
    pp.v[k] += delta;
    pm.v[k] -= delta;
    const BackwardExit a = backward_exit(pp, H, horizon, opt);
    const BackwardExit b = backward_exit(pm, H, horizon, opt);
    if (!a.hit || !b.hit) throw NearGrazing("perturbed trajectory misses the wall");
    const Vec3 dx = a.x_b - b.x_b;
    M(0, k) = e1.dot(dx) / (2 * delta);
    M(1, k) = e2.dot(dx) / (2 * delta);
    M(2, k) = (a.t_b - b.t_b) / (2 * delta);
  }
  r.fd = std::abs(M.determinant());
  r.analytic = std::pow(r.exit.t_b, 3) / nv;
  return r;
}

namespace {

QuadratureRule graded_rule(double length, int panels, int order) {
  const QuadratureRule gl = gauss_legendre(order, 0.0, 1.0);
  QuadratureRule r;
  for (int m = 0; m < panels; ++m) {
    const double hi = length * std::ldexp(1.0, -m);
    const double lo = m == panels - 1 ? 0.0 : 0.5 * hi;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      r.nodes.push_back(lo + (hi - lo) * gl.nodes[i]);
      r.weights.push_back((hi - lo) * gl.weights[i]);
    }
  }
  return r;
}

double inverse_moment_level(const Vec3& x, double t, const FieldHistory& H, double sigma, double N,
                            double eps, int level, const Vec3& axis) {
  const int panels = 3 + 2 * level;
  const QuadratureRule rr = graded_rule(N, panels, 4);
  const QuadratureRule cc = graded_rule(1.0, panels, 4);
  const int n_phi = 8 + 4 * level;
  Vec3 t1, t2;
  tangent_basis(axis, t1, t2);
  std::vector<double> c_nodes, c_weights;
  for (std::size_t i = 0; i < cc.nodes.size(); ++i) {
    c_nodes.push_back(cc.nodes[i]);
    c_weights.push_back(cc.weights[i]);
    c_nodes.push_back(-cc.nodes[i]);
    c_weights.push_back(cc.weights[i]);
  }
  const std::size_t nr = rr.nodes.size();
  std::vector<double> partial(nr, 0.0);
  WeightParams wp{eps};
  parallel_for(nr, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double r = rr.nodes[i];
      double acc = 0.0;
      for (std::size_t k = 0; k < c_nodes.size(); ++k) {
        const double c = c_nodes[k], s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (int m = 0; m < n_phi; ++m) {
          const double ph = kTwoPi * (m + 0.5) / n_phi;
          const Vec3 u = r * (c * axis + s * (std::cos(ph) * t1 + std::sin(ph) * t2));
          const double a = kinetic_weight({t, x, u}, H, wp);
          if (a > 0.0) acc += c_weights[k] * std::pow(a, -sigma);
        }
      }
      partial[i] = rr.weights[i] * r * r * acc * kTwoPi / n_phi;
    }
  });
  return pairwise_sum(partial);
}

}  // namespace

InverseMomentResult alpha_inverse_moment_ex(const Vec3& x, double t, const FieldHistory& H, double sigma,
                                            double N, const InverseMomentOptions& opt) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw ConfigError("sigma must lie in (0, 1)");
  const ConvexDomain& dom = H.domain();
  Vec3 axis = Vec3(0, 0, 1);
  const Vec3 xb = dom.project(x);
  const Vec3 g = dom.grad_level(xb);
  if (g.norm() > 1e-12) axis = g.normalized();
  InverseMomentResult res;
  double prev = inverse_moment_level(x, t, H, sigma, N, opt.epsilon, 0, axis);
  for (int L = 1; L <= opt.max_level; ++L) {
    const double cur = inverse_moment_level(x, t, H, sigma, N, opt.epsilon, L, axis);
    if (std::abs(cur - prev) <= opt.rel_tol * std::abs(cur)) {
      res.value = cur;
      res.previous = prev;
      res.level = L;
      return res;
    }
    prev = cur;
  }
  throw NotConverged(opt.max_level, prev);
}

double alpha_inverse_moment(const Vec3& x, double t, const FieldHistory& H, double sigma, double N,
                            const InverseMomentOptions& opt) {
  return alpha_inverse_moment_ex(x, t, H, sigma, N, opt).value;
}

}  // namespace vpb
