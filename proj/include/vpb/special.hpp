#pragma once

#include <vector>

namespace vpb {

// Sine integral Si(x) = int_0^x sin(t)/t dt.
double sine_integral(double x);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule with n nodes on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Quintic smoothstep clamped to [0, 1].
double smoothstep5(double tau);

}  // namespace vpb
