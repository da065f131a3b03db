#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qpm/core.hpp"

namespace qpm {

/// Finite stand-in for an unbounded PL radius (affine constraints).
inline constexpr double kUnboundedRadius = 1e300;

/**
 * Region C_R = {x : ‖c(x)‖ ≤ R} on which ‖J(x)ᵀc(x)‖ ≥ σ_min‖c(x)‖ holds.
 */
struct PLRegion {
  enum class Provenance { analytic, estimated };

  double R = 0.0;
  double sigma_min = 0.0;
  Provenance provenance = Provenance::analytic;
};

/// Objective oracles with a global lower bound.
struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  /// ∇²f(x) v; optional, falls back to the dense Hessian.
  std::function<Vector(const Vector&, const Vector&)> hessian_product;
  double f_low = -std::numeric_limits<double>::infinity();
};

/// A constraint map c: Rⁿ → Rᵐ with derivatives and its PL region.
struct ConstraintBlock {
  Index n = 0;
  Index m = 0;
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
  std::function<Matrix(const Vector&, Index)> hessian;
  /// Σ w_i ∇²c_i(x) v.
  std::function<Vector(const Vector& x, const Vector& w, const Vector& v)> hessian_product;
  PLRegion pl;
};

ConstraintBlock sphere_constraint(Index n);
/// Requires rank(A) = rows(A); σ_min(A) becomes the PL constant.
ConstraintBlock affine_constraint(const Matrix& a, const Vector& b);
/// c_i(x) = x_i(1 − x_i); requires 0 < R < 1/4.
ConstraintBlock binary_constraint(Index n, double R = 0.2);
/**
 * XᵀX − I_p for X ∈ R^{n×p} stored column-major in a vector of length np.
 * Only the upper triangle is kept, with off-diagonal entries scaled by √2 so
 * that ‖c(X)‖ equals the Frobenius norm of XᵀX − I_p. Requires 0 < R < 1.
 */
ConstraintBlock stiefel_constraint(Index n, Index p, double R = 0.5);
/// Lifts a block acting on n_block coordinates to coordinates
/// [offset, offset + n_block) of an n_total-dimensional variable.
ConstraintBlock embed_constraint(const ConstraintBlock& block, Index offset, Index n_total);
/**
 * Concatenates constraint blocks on a common variable. The combined region is
 * R = min R_i, σ = min σ_i, which is a valid PL pair when the blocks act on
 * disjoint coordinates (block-diagonal Jacobian).
 */
ConstraintBlock stack_constraints(const std::vector<ConstraintBlock>& parts);

ProblemSpec make_problem(std::string name, const Objective& objective, const ConstraintBlock& c);

/// Σ 100(x_{2i} − x_{2i−1}²)² + (1 − x_{2i−1})², n even, f_low = 0.
Objective rosenbrock_objective(Index n);
/// ½ Σ d_i (x_i − a_i)², d_i > 0, f_low = 0.
Objective diagonal_quadratic_objective(Vector a, Vector d);
/// trace(XᵀCX) for symmetric positive definite C, X ∈ R^{n×p}, f_low = 0.
Objective trace_objective(const Matrix& c, Index p);

struct ProblemWithRegion {
  ProblemSpec problem;
  PLRegion pl;
};

ProblemWithRegion make_rosenbrock_sphere(Index n);
/// √((1 + ε₀/√2)/n)·1, so that c(x₀) = ε₀/√2.
Vector make_x0_sphere(Index n, double eps0);
ProblemWithRegion make_affine(const Matrix& a, const Vector& b, const Objective& f);
ProblemWithRegion make_binary(Index n, const Objective& f, double R = 0.2);
ProblemWithRegion make_stiefel(Index n, Index p, const Objective& f, double R = 0.5);

using Rng = std::mt19937_64;
using Sampler = std::function<Vector(Rng&)>;

/// Uniform over [lo, hi]^n.
Sampler box_sampler(Index n, double lo = -2.0, double hi = 2.0);
/// feasible(rng) + N(0, s²I) with s log-uniform in [min_scale, max_scale].
Sampler near_feasible_sampler(std::function<Vector(Rng&)> feasible, double min_scale,
                              double max_scale);
/// x = √(1 + t)·u with u uniform on the unit sphere and t uniform in [−R, R]:
/// covers the whole tube {|‖x‖² − 1| ≤ R}.
Sampler sphere_tube_sampler(Index n, double R);

struct PLEstimate {
  double sigma_hat = 0.0;
  Vector worst_point;
  long accepted = 0;
  long drawn = 0;
};

/**
 * min over samples with 0 < ‖c(x)‖ ≤ R of ‖J(x)ᵀc(x)‖ / ‖c(x)‖.
 * Deterministic for a given seed. Throws SamplingError when nothing is
 * accepted.
 */
PLEstimate estimate_pl(const ProblemSpec& problem, double R, long n_samples, const Sampler& sampler,
                       std::uint64_t seed);

/// Smallest singular value of a (rows ≤ cols).
double smallest_singular_value(const Matrix& a);

/// Size parameters for the registry.
struct ProblemSize {
  Index n = 2;
  Index m = 0;  // affine: rows of A (0 → n/2)
  Index p = 2;  // stiefel: columns
};

/// A built-in problem ready to solve: oracles, PL data, start point, sampler.
struct TestProblem {
  ProblemSpec problem;
  PLRegion pl;
  Vector x0;
  /// Sampler for estimate_pl, parameterized by the tube radius R.
  std::function<Sampler(double R)> pl_sampler;
  /// Analytic σ_min as a function of R; empty when unknown.
  std::function<double(double R)> analytic_sigma;
};

/// Registry names: rosenbrock-sphere, affine-quadratic, binary-quadratic,
/// stiefel-trace, stacked-demo.
const std::vector<std::string>& registered_problems();
TestProblem make_registered(const std::string& name, const ProblemSize& size, double eps0,
                            std::uint64_t seed);

}  // namespace qpm
