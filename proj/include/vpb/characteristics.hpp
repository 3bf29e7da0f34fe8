#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vpb/field.hpp"
#include "vpb/geometry.hpp"

namespace vpb {

struct PhasePoint {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct BackwardExit {
  double t_b = 0.0;
  Vec3 x_b = Vec3::Zero();
  Vec3 v_b = Vec3::Zero();
  bool hit = false;
};

// Forward exit uses the same record: t_b is the forward travel time.
using ForwardExit = BackwardExit;

struct WeightParams {
  double epsilon = 0.05;
  double chi(double tau) const;
};

using Mat6 = Eigen::Matrix<double, 6, 6>;

// Time-ordered potential snapshots with the negative-time rule
// phi(t) = e^{-|t|} phi(0) for t < 0; or an analytic field for tests.
class FieldHistory {
 public:
  using AnalyticE = std::function<Vec3(double, const Vec3&)>;
  using AnalyticGradE = std::function<Mat3(double, const Vec3&)>;

  explicit FieldHistory(ConvexDomain domain);
  static FieldHistory analytic(ConvexDomain domain, AnalyticE E, AnalyticGradE gradE = {});

  const ConvexDomain& domain() const { return domain_; }
  void push(std::shared_ptr<const PotentialField> phi);
  std::size_t size() const { return snaps_.size(); }
  const PotentialField& snapshot(std::size_t k) const { return *snaps_[k]; }
  std::shared_ptr<const PotentialField> snapshot_ptr(std::size_t k) const { return snaps_[k]; }

  Vec3 field(double t, const Vec3& x) const;
  Mat3 field_gradient(double t, const Vec3& x) const;

  // true if the field is numerically zero at all times in [t0, t1]
  bool negligible_on(double t0, double t1) const;

 private:
  void bracket(double t, int& k0, int& k1, double& w0, double& w1) const;
  ConvexDomain domain_;
  std::vector<std::shared_ptr<const PotentialField>> snaps_;
  AnalyticE analytic_;
  AnalyticGradE analytic_grad_;
};

struct IntegratorOptions {
  // 0 selects min(0.01, 0.1/(1+|v|))
  double step = 0.0;
  int bisection_iterations = 40;
};

double default_step(const Vec3& v);

// One classical RK4 step of dX/ds = V, dV/ds = E(s, X).
PhasePoint rk4_step(const FieldHistory& H, const PhasePoint& p, double dt);

PhasePoint trace(const PhasePoint& p, const FieldHistory& H, double s, const IntegratorOptions& opt = {});
BackwardExit backward_exit(const PhasePoint& p, const FieldHistory& H, double horizon,
                           const IntegratorOptions& opt = {});
ForwardExit forward_exit(const PhasePoint& p, const FieldHistory& H, double horizon,
                         const IntegratorOptions& opt = {});

struct KineticWeight {
  double value = 1.0;
  bool grazing = false;
  BackwardExit exit;
};

inline constexpr double kGrazingCutoff = 1e-4;

KineticWeight kinetic_weight_ex(const PhasePoint& p, const FieldHistory& H, const WeightParams& w = {},
                                const IntegratorOptions& opt = {});
double kinetic_weight(const PhasePoint& p, const FieldHistory& H, const WeightParams& w = {},
                      const IntegratorOptions& opt = {});

struct VariationalResult {
  PhasePoint end;
  Mat6 jacobian;  // rows (X, V), columns (x, v)
};

VariationalResult variational_jacobian(const PhasePoint& p, const FieldHistory& H, double s,
                                       const IntegratorOptions& opt = {});

struct ExitMapJacobian {
  double analytic = 0.0;
  double fd = 0.0;
  BackwardExit exit;
};

ExitMapJacobian exit_map_jacobian(const PhasePoint& p, const FieldHistory& H, double horizon = 50.0);

struct InverseMomentOptions {
  double epsilon = 0.05;
  int max_level = 6;
  double rel_tol = 0.1;
};

struct InverseMomentResult {
  double value = 0.0;
  double previous = 0.0;
  int level = 0;
};

InverseMomentResult alpha_inverse_moment_ex(const Vec3& x, double t, const FieldHistory& H, double sigma,
                                            double N, const InverseMomentOptions& opt = {});
double alpha_inverse_moment(const Vec3& x, double t, const FieldHistory& H, double sigma, double N,
                            const InverseMomentOptions& opt = {});

}  // namespace vpb
