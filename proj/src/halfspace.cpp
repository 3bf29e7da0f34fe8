#include "vpb/halfspace.hpp"

#include <cmath>

#include "vpb/special.hpp"

namespace vpb {

std::vector<double> half_space_weights(const VelocityGrid& grid, const Vec3& n_in) {
  const Vec3 n = n_in.normalized();
  int k = 0;
  for (int d = 1; d < 3; ++d)
    if (std::abs(n[d]) > std::abs(n[k])) k = d;
  const int p = (k + 1) % 3, q = (k + 2) % 3;
  const int N = grid.n();
  const double h = grid.h();
  const double b = n[k];
  const double sg = b > 0 ? 1.0 : -1.0;
  std::vector<double> w(grid.size(), 0.0);
  int idx[3];
  for (int ip = 0; ip < N; ++ip)
    for (int iq = 0; iq < N; ++iq) {
      const double a = n[p] * grid.coord(ip) + n[q] * grid.coord(iq);
      const double t0 = -a / b;
      idx[p] = ip;
      idx[q] = iq;
      for (int m = 0; m < N; ++m) {
        const double dx = grid.coord(m) - t0;
        const double ind = 0.5 + sg * sine_integral(kPi * dx / h) / kPi;
        idx[k] = m;
        w[grid.index(idx[0], idx[1], idx[2])] = h * b * dx * ind * h * h;
      }
    }
  return w;
}

}  // namespace vpb
