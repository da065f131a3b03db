#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpm/inner.hpp"
#include "qpm/problems.hpp"

namespace qpm {

enum class InnerKind { gd, tr };

std::string_view to_string(InnerKind k);

struct QpmConfig {
  double beta0 = 1.0;
  double alpha = 1.2;
  ToleranceRule rule;
  InnerKind inner_kind = InnerKind::gd;
  GdConfig gd;
  TrConfig tr;
  /// 0 selects the default: ⌈T̂⌉ + 10 when f_low is finite, 500 otherwise.
  long max_outer_iters = 0;
  /// Require ‖c(x₀)‖ ≤ ε₀/√2 before starting.
  bool enforce_x0_feasibility = true;
  /// PL region used for the bound report (T̃, β_max with PL).
  std::optional<PLRegion> pl;
  /// Seeds the sublevel-set sampling behind the L_{f,0} estimate.
  std::uint64_t seed = 0;
  /// Optional per-step hooks forwarded to the inner solver.
  GdObserver gd_observer;
  TrObserver tr_observer;

  void validate() const;
};

/// β_k > kBetaOverflow aborts the run.
inline constexpr double kBetaOverflow = 1e15;

/// One outer iteration k: the subproblem min Q_{β_k} and its solution x_{k+1}.
struct OuterRecord {
  long k = 0;
  double beta = 0.0;
  long inner_iters = 0;
  double c_norm = 0.0;
  double grad_q_norm = 0.0;
  double f = 0.0;
  double q = 0.0;
  /// Oracle calls spent in this outer iteration.
  OracleCounts evals;
  double q_xk = 0.0;
  double q_x0 = 0.0;
  /// Tolerance τ(x_{k+1}) that the inner solver met (or missed).
  double tau = 0.0;
  InnerStatus inner_status = InnerStatus::converged;
  bool warm_from_x0 = false;
  Vector x;
};

struct KKTCertificate {
  Vector x;
  Vector lambda;
  double feas_residual = 0.0;
  double stat_residual = 0.0;
  double eps0 = 0.0;
  double eps1 = 0.0;

  bool valid() const { return feas_residual <= eps0 && stat_residual <= eps1; }
};

struct BoundInputs {
  double f0 = 0.0;
  double f_low = 0.0;
  std::optional<double> sigma_min;
  std::optional<double> R;
  std::optional<double> L_f0;
  /// L_f0 came from sampling rather than an analytic bound.
  bool L_f0_estimated = false;

  bool has_pl() const { return sigma_min && R && L_f0; }
};

struct BoundReport {
  double beta_final = 0.0;
  long outer_iters_observed = 0;
  double T_hat = 0.0;
  std::optional<double> T_tilde;
  double beta_max_noPL = 0.0;
  std::optional<double> beta_max_PL;
  BoundInputs inputs;
};

enum class QpmStatus { certified, inner_failure, outer_cap, beta_overflow };

std::string_view to_string(QpmStatus s);

struct RunReport {
  std::string problem;
  Index n = 0;
  Index m = 0;
  QpmConfig config;
  long max_outer_iters = 0;
  double f0 = 0.0;
  double c0_norm = 0.0;
  std::vector<OuterRecord> trace;
  OracleCounters counters;
  /// Present when f_low is finite.
  std::optional<BoundReport> bounds;
  std::vector<std::string> data_errors;
  double elapsed_seconds = 0.0;
};

struct QpmResult {
  QpmStatus status = QpmStatus::certified;
  std::string message;
  std::optional<KKTCertificate> certificate;
  RunReport report;

  bool ok() const { return status == QpmStatus::certified && certificate && certificate->valid(); }
};

/// argmin of Q_β over {x_k, x_0}; ties go to x_k. Costs no oracle call.
const PenaltyPoint& warm_start(const PenaltyPoint& x_k, const PenaltyPoint& x_0, double beta);
/// Same rule on raw points; evaluates both through the raw oracles.
Vector warm_start(const ProblemSpec& problem, const Vector& x_k, const Vector& x_0, double beta);

/**
 * Quadratic penalty method.
 *
 * Each outer iteration warm starts from the better of x_k and x₀, minimizes
 * Q_{β_k} to ‖∇Q‖ ≤ τ(x), and stops once ‖c(x_{k+1})‖ ≤ ε₀ with
 * λ = −β_k c(x_{k+1}). Otherwise β grows by α.
 *
 * Throws ConfigError for invalid settings or an infeasible x₀ (when enforced)
 * and CapabilityError when the inner solver needs missing oracles. Solver
 * failures are returned with the partial trace.
 */
QpmResult qpm_solve(const ProblemSpec& problem, const Vector& x0, const QpmConfig& cfg);

/// ‖c(x)‖ and ‖∇f(x) − J(x)ᵀλ‖ from the raw oracles (no call accounting).
KKTCertificate certify_kkt(const ProblemSpec& problem, const Vector& x, const Vector& lambda,
                           const ToleranceRule& rule);

/// T̂, β_max without PL, and (with PL inputs) T̃ and β_max with PL.
/// Throws ConfigError when f₀ ≤ f_low or R ≤ ε₀.
BoundReport compute_bounds(const BoundInputs& inputs, const ToleranceRule& rule,
                           const QpmConfig& cfg);

/**
 * Estimate of L_{f,0} = sup ‖∇f‖ over {f ≤ 2f(x₀) − f_low}: the max over x₀,
 * the trace iterates, and Gaussian perturbations of them that stay in the
 * sublevel set. Raw oracles, seeded.
 */
double estimate_lf0(const ProblemSpec& problem, const Vector& x0,
                    const std::vector<OuterRecord>& trace, double f_low, std::uint64_t seed,
                    int n_samples = 1000);

/**
 * Post-run checks on a completed trace:
 *   (a) f(x_k) ≤ 2f(x₀) − f_low whenever ‖c(x_k)‖ > ε₀,
 *   (b) β_{T−2} below the β_max bounds,
 *   (c) T ≤ ⌈T̂⌉ and, with PL inputs, T ≤ ⌈T̃⌉.
 * An estimated L_{f,0} gets one α-step of slack in (b) and (c).
 * Returns one message per violation; requires report.bounds.
 */
std::vector<std::string> monitor_invariants(const RunReport& report);

}  // namespace qpm
