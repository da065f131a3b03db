#pragma once

#include <functional>
#include <string_view>

#include "qpm/penalty.hpp"

namespace qpm {

struct GdConfig {
  double armijo_slope = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  double step_recovery = 2.0;
  long max_inner_iters = 200000;
  /// Relative round-off band on Q; 0 disables the derivative-form test.
  double noise_band = 1e-13;

  void validate() const;
};

struct TrConfig {
  double delta0 = 1.0;
  double delta_max = 100.0;
  double eta_accept = 0.1;
  double eta_expand = 0.75;
  double shrink = 0.25;
  double expand = 2.0;
  /// Upper bound on the CG forcing term; the term used is min(cg_rel_tol, √‖g‖).
  double cg_rel_tol = 0.1;
  long max_inner_iters = 20000;
  /// Relative round-off band added to both reductions in the ratio test; 0 disables.
  double noise_band = 1e-13;

  void validate() const;
};

enum class InnerStatus { converged, iteration_cap, stalled };

std::string_view to_string(InnerStatus s);

struct InnerResult {
  Vector x_out;
  double grad_norm = 0.0;
  double q_out = 0.0;
  /// GD: accepted steps. TR: trial steps, accepted or not.
  long iters = 0;
  long accepted = 0;
  InnerStatus status = InnerStatus::converged;
  /// GD only: trials rejected by the derivative-form test. Each spent a
  /// gradient call on a point that was not kept.
  long slope_rejections = 0;
  /// Oracle data at x_out, gradients included.
  PenaltyPoint point;
};

/// Data handed to a GD observer for every accepted step.
struct GdStep {
  double q_before;
  double q_after;
  double step;
  double grad_norm_sq;
  double armijo_slope;
  /// Accepted by the derivative form ∇Q(x_t)ᵀ∇Q(x) ≥ −(1 − 2·slope)‖∇Q(x)‖²
  /// because the value difference sat inside the round-off band.
  bool derivative_test = false;
  double trial_dot = 0.0;
};

struct CgResult {
  Vector step;
  bool boundary_hit = false;
  bool curvature_flag = false;
  /// m(d) = gᵀd + ½dᵀHd.
  double model_value = 0.0;
  long iters = 0;
};

/// Data handed to a TR observer for every trial step.
struct TrStep {
  const LinearOperator& hessian;
  const Vector& gradient;
  double delta;
  const CgResult& cg;
  double q_before;
  double q_trial;
  double rho;
  bool accepted;
  double delta_next;
};

using GdObserver = std::function<void(const GdStep&)>;
using TrObserver = std::function<void(const TrStep&)>;

/**
 * Gradient descent with Armijo backtracking on Q_β.
 *
 * Stops at the first iterate with ‖∇Q_β‖ ≤ τ(x). Each backtracking trial costs
 * one value call, each accepted iterate one gradient call. A trial that
 * yields non-finite values is treated as a failed Armijo test; a trial that
 * no longer moves x in floating point ends the solve as stalled.
 *
 * Near a minimizer the decrease the Armijo test asks for can drop below the
 * rounding error of Q itself. When |Q(x_t) − Q(x)| ≤ noise_band·(1 + |Q(x)|)
 * the value comparison is noise, and the test is applied in derivative form
 * instead, which is equivalent on quadratics; the trial must also stay within
 * the band of the starting value. That costs one extra gradient call, reused
 * if the step is accepted.
 */
InnerResult gd_armijo(Evaluator& ev, double beta, PenaltyPoint start, const ToleranceRule& stop,
                      const GdConfig& cfg, const GdObserver& observer = {});
InnerResult gd_armijo(Evaluator& ev, double beta, const Vector& x_start, const ToleranceRule& stop,
                      const GdConfig& cfg, const GdObserver& observer = {});

/**
 * Steihaug-Toint truncated CG for min gᵀd + ½dᵀHd subject to ‖d‖ ≤ delta.
 *
 * The first CG iterate is the Cauchy point and the model decreases
 * monotonically along the CG path, so the result always matches the Cauchy
 * decrease. Stops on ‖r‖ ≤ rel_tol‖g‖, on non-positive curvature (moving to
 * the boundary along the current direction) or when the boundary is crossed.
 */
CgResult truncated_cg(const LinearOperator& hessian, const Vector& g, double delta, double rel_tol,
                      long max_iters = -1);

/**
 * Trust-region Newton with truncated CG and radius cap delta_max.
 *
 * The ratio test uses (ΔQ + b)/(Δm + b) with b = noise_band·(1 + |Q|), so
 * steps whose actual and predicted reductions are both below round-off are
 * judged by the model. Accepted values never exceed the starting Q by more
 * than b.
 */
InnerResult tr_solve(Evaluator& ev, double beta, PenaltyPoint start, const ToleranceRule& stop,
                     const TrConfig& cfg, const TrObserver& observer = {});
InnerResult tr_solve(Evaluator& ev, double beta, const Vector& x_start, const ToleranceRule& stop,
                     const TrConfig& cfg, const TrObserver& observer = {});

}  // namespace qpm
