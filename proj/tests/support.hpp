#pragma once

#include <cmath>

#include "qpm/problems.hpp"

namespace qpm::testing {

/// f(x) = ½ xᵀHx + gᵀx with the zero constraint map c: Rⁿ → Rᵐ.
inline ProblemSpec unconstrained_quadratic(const Matrix& h, const Vector& g, Index m = 1) {
  ProblemSpec p;
  p.name = "quadratic";
  p.n = h.rows();
  p.m = m;
  p.objective = [h, g](const Vector& x) { return 0.5 * x.dot(h * x) + g.dot(x); };
  p.objective_gradient = [h, g](const Vector& x) -> Vector { return h * x + g; };
  p.constraints = [m](const Vector&) -> Vector { return Vector::Zero(m); };
  p.constraint_jacobian = [m, n = p.n](const Vector&) -> Matrix { return Matrix::Zero(m, n); };
  p.objective_hessian = [h](const Vector&) -> Matrix { return h; };
  p.constraint_hessian = [n = p.n](const Vector&, Index) -> Matrix { return Matrix::Zero(n, n); };
  return p;
}

/// Rosenbrock in closed form for n = 2, written out independently of the library.
inline double rosen2(double a, double b) {
  return 100.0 * (b - a * a) * (b - a * a) + (1.0 - a) * (1.0 - a);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace qpm::testing
