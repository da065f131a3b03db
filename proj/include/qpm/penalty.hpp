#pragma once

#include <functional>
#include <optional>

#include "qpm/core.hpp"

namespace qpm {

/**
 * Feasibility-aware subproblem tolerance
 *
 *   τ(x) = max{ε₁, min(τ_cap, (ε₁/ε₀)‖c(x)‖)}.
 *
 * τ_cap = 0 gives the constant rule τ ≡ ε₁ and τ_cap = +inf the uncapped
 * proportional rule. Any τ_cap ≥ 0 is accepted and the formula applied as is.
 */
struct ToleranceRule {
  double eps0 = 1e-6;
  double eps1 = 1e-6;
  double tau_cap = std::numeric_limits<double>::infinity();

  static ToleranceRule fixed(double eps1) { return {1.0, eps1, 0.0}; }
  void validate() const;
};

double tolerance(const ToleranceRule& rule, double c_norm);

struct PenaltyValue {
  double q = 0.0;
  double f_val = 0.0;
  double c_norm = 0.0;
  double beta = 0.0;
};

/// Q_β(x) = f(x) + (β/2)‖c(x)‖². One value-oracle call.
PenaltyValue eval_penalty(Evaluator& ev, const Vector& x, double beta);
/// ∇f(x) + β J(x)ᵀc(x). One value call for c and one gradient call.
Vector grad_penalty(Evaluator& ev, const Vector& x, double beta);
/// ∇²f(x) + β(JᵀJ + Σ c_i ∇²c_i), dense. One Hessian call (plus the value and
/// gradient calls that supply c and J).
Matrix hess_penalty(Evaluator& ev, const Vector& x, double beta);

/**
 * Cached oracle data at one point, reused across penalty parameters.
 *
 * The value part (f, c) is always present; the gradient part is filled on
 * demand. Since Q_β and ∇Q_β are affine in β once f, c, ∇f and J are known,
 * re-pricing a point for a new β costs no oracle call.
 */
struct PenaltyPoint {
  Vector x;
  double f = 0.0;
  Vector c;
  double c_norm = 0.0;
  double c_sq = 0.0;
  std::optional<GradientEval> grads;

  static PenaltyPoint evaluate(Evaluator& ev, const Vector& x);
  static PenaltyPoint from_values(Vector x, ValueEval&& v);
  void ensure_gradients(Evaluator& ev);

  double q(double beta) const { return f + 0.5 * beta * c_sq; }
  /// Requires gradients. Computed as ∇f + Jᵀ(βc) so that it matches the KKT
  /// residual ∇f − Jᵀλ with λ = −βc bit for bit.
  Vector grad_q(double beta) const;
};

using LinearOperator = std::function<Vector(const Vector&)>;

/// Matrix-free ∇²Q_β at a point with gradients: v ↦ (∇²f + βΣc_i∇²c_i)v + βJᵀ(Jv).
/// Counts one Hessian call when built.
LinearOperator penalty_hessian_operator(Evaluator& ev, const PenaltyPoint& point, double beta);

}  // namespace qpm
