#include "qpm/outer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qpm {

namespace {

// Relative slack on the x₀ feasibility check. For small ε₀ the residual
// itself carries cancellation error (e.g. ‖x‖² − 1), so an exact comparison
// would reject starting points built to sit on the boundary.
constexpr double kX0Slack = 1e-6;

double closed_form_beta(const QpmConfig& cfg, long k) {
  return cfg.beta0 * std::pow(cfg.alpha, static_cast<double>(k));
}

OuterRecord make_record(long k, double beta, const InnerResult& inner, const ToleranceRule& rule,
                        double q_xk, double q_x0, bool from_x0, const OracleCounts& evals) {
  OuterRecord r;
  r.k = k;
  r.beta = beta;
  r.inner_iters = inner.iters;
  r.c_norm = inner.point.c_norm;
  r.grad_q_norm = inner.grad_norm;
  r.f = inner.point.f;
  r.q = inner.q_out;
  r.evals = evals;
  r.q_xk = q_xk;
  r.q_x0 = q_x0;
  r.tau = tolerance(rule, inner.point.c_norm);
  r.inner_status = inner.status;
  r.warm_from_x0 = from_x0;
  r.x = inner.point.x;
  return r;
}

}  // namespace

std::string_view to_string(InnerKind k) { return k == InnerKind::gd ? "gd" : "tr"; }

std::string_view to_string(QpmStatus s) {
  switch (s) {
    case QpmStatus::certified:
      return "certified";
    case QpmStatus::inner_failure:
      return "inner-failure";
    case QpmStatus::outer_cap:
      return "outer-cap";
    case QpmStatus::beta_overflow:
      return "beta-overflow";
  }
  return "unknown";
}

void QpmConfig::validate() const {
  if (!(beta0 >= 1.0) || !std::isfinite(beta0)) throw ConfigError("beta0 must be a finite number >= 1");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be a finite number > 1 (the penalty has to grow every outer iteration)");
  }
  rule.validate();
  if (inner_kind == InnerKind::gd) {
    gd.validate();
  } else {
    tr.validate();
  }
  if (max_outer_iters < 0) throw ConfigError("max_outer_iters must be non-negative (0 selects the default)");
  if (pl) {
    if (!(pl->R > 0.0)) throw ConfigError("PL radius R must be positive");
    if (!(pl->sigma_min > 0.0)) throw ConfigError("PL constant sigma_min must be positive");
  }
}

const PenaltyPoint& warm_start(const PenaltyPoint& x_k, const PenaltyPoint& x_0, double beta) {
  return x_0.q(beta) < x_k.q(beta) ? x_0 : x_k;
}

Vector warm_start(const ProblemSpec& problem, const Vector& x_k, const Vector& x_0, double beta) {
  auto q = [&](const Vector& x) {
    return problem.objective(x) + 0.5 * beta * problem.constraints(x).squaredNorm();
  };
  return q(x_0) < q(x_k) ? x_0 : x_k;
}

KKTCertificate certify_kkt(const ProblemSpec& problem, const Vector& x, const Vector& lambda,
                           const ToleranceRule& rule) {
  if (x.size() != problem.n || lambda.size() != problem.m) {
    throw ConfigError("certify_kkt: dimension mismatch");
  }
  KKTCertificate cert;
  cert.x = x;
  cert.lambda = lambda;
  cert.eps0 = rule.eps0;
  cert.eps1 = rule.eps1;
  cert.feas_residual = problem.constraints(x).norm();
  const Matrix jac = problem.constraint_jacobian(x);
  // written as ∇f + Jᵀ(−λ) to match ∇f + Jᵀ(βc) bit for bit when λ = −βc
  const Vector neg = -lambda;
  cert.stat_residual = (problem.objective_gradient(x) + jac.transpose() * neg).norm();
  return cert;
}

BoundReport compute_bounds(const BoundInputs& inputs, const ToleranceRule& rule,
                           const QpmConfig& cfg) {
  if (!std::isfinite(inputs.f_low) || !std::isfinite(inputs.f0)) {
    throw ConfigError("bounds need finite f(x0) and f_low");
  }
  const double gap = inputs.f0 - inputs.f_low;
  if (!(gap > 0.0)) throw ConfigError("bounds need f(x0) > f_low");
  if (!(cfg.alpha > 1.0)) throw ConfigError("bounds need alpha > 1");
  if (!(cfg.beta0 > 0.0)) throw ConfigError("bounds need beta0 > 0");
  const double eps0 = rule.eps0;
  const double log_alpha = std::log(cfg.alpha);

  BoundReport b;
  b.inputs = inputs;
  b.beta_max_noPL = 4.0 * gap / (eps0 * eps0);
  b.T_hat = 2.0 + std::log(b.beta_max_noPL / cfg.beta0) / log_alpha;

  if (inputs.sigma_min || inputs.R || inputs.L_f0) {
    if (!inputs.has_pl()) throw ConfigError("PL bounds need sigma_min, R and L_f0 together");
    if (!(*inputs.R > eps0)) {
      std::ostringstream os;
      os << "PL inputs: R = " << *inputs.R << " must exceed eps0 = " << eps0;
      throw ConfigError(os.str());
    }
    if (!(*inputs.sigma_min > 0.0)) throw ConfigError("PL inputs: sigma_min must be positive");
    if (!(*inputs.L_f0 >= 0.0)) throw ConfigError("PL inputs: L_f0 must be non-negative");
    const double bmax =
        std::max((*inputs.L_f0 + rule.eps1) / *inputs.sigma_min, 4.0 * gap / *inputs.R) / eps0;
    b.beta_max_PL = bmax;
    b.T_tilde = 2.0 + std::log(bmax / cfg.beta0) / log_alpha;
  }
  return b;
}

double estimate_lf0(const ProblemSpec& problem, const Vector& x0,
                    const std::vector<OuterRecord>& trace, double f_low, std::uint64_t seed,
                    int n_samples) {
  std::vector<const Vector*> anchors{&x0};
  for (const auto& r : trace) anchors.push_back(&r.x);

  double best = 0.0;
  for (const Vector* a : anchors) best = std::max(best, problem.objective_gradient(*a).norm());

  const double level = 2.0 * problem.objective(x0) - f_low;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, anchors.size() - 1);
  std::uniform_real_distribution<double> log_scale(std::log(1e-3), 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < n_samples; ++s) {
    const Vector& base = *anchors[pick(rng)];
    Vector dir(base.size());
    for (Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
    const double r = std::exp(log_scale(rng)) * (1.0 + base.norm());
    const Vector x = base + (r / dir.norm()) * dir;
    const double fx = problem.objective(x);
    if (!std::isfinite(fx) || fx > level) continue;
    best = std::max(best, problem.objective_gradient(x).norm());
  }
  return best;
}

QpmResult qpm_solve(const ProblemSpec& problem, const Vector& x0, const QpmConfig& cfg) {
  cfg.validate();
  problem.validate();
  if (x0.size() != problem.n) throw ConfigError("x0 has the wrong dimension");
  if (!x0.allFinite()) throw ConfigError("x0 must be finite");
  if (cfg.inner_kind == InnerKind::tr && !problem.has_hessians()) {
    throw CapabilityError(problem.name + ": the trust-region inner solver needs Hessian oracles");
  }

  const auto started = std::chrono::steady_clock::now();
  const ToleranceRule& rule = cfg.rule;
  Evaluator ev(problem);

  QpmResult result;
  RunReport& rep = result.report;
  rep.problem = problem.name;
  rep.n = problem.n;
  rep.m = problem.m;
  rep.config = cfg;

  PenaltyPoint p0 = PenaltyPoint::evaluate(ev, x0);
  rep.f0 = p0.f;
  rep.c0_norm = p0.c_norm;
  if (cfg.enforce_x0_feasibility) {
    const double limit = rule.eps0 / std::sqrt(2.0);
    if (p0.c_norm > limit * (1.0 + kX0Slack)) {
      std::ostringstream os;
      os << "x0 violates ||c(x0)|| <= eps0/sqrt(2): ||c(x0)|| = " << p0.c_norm << ", limit " << limit;
      throw ConfigError(os.str());
    }
  }
  // the first subproblem starts at x0 anyway; caching here spares later restarts
  p0.ensure_gradients(ev);

  const bool bounded = std::isfinite(problem.f_low) && p0.f > problem.f_low;
  BoundInputs inputs;
  inputs.f0 = p0.f;
  inputs.f_low = problem.f_low;
  long max_outer = cfg.max_outer_iters;
  if (max_outer == 0) {
    max_outer = 500;
    if (bounded) {
      const double t_hat = compute_bounds(inputs, rule, cfg).T_hat;
      max_outer = std::max(1L, static_cast<long>(std::ceil(t_hat))) + 10;
    }
  }
  rep.max_outer_iters = max_outer;

  PenaltyPoint xk = p0;
  double beta = cfg.beta0;
  for (long k = 0;; ++k) {
    if (k >= max_outer) {
      result.status = QpmStatus::outer_cap;
      std::ostringstream os;
      os << "no eps0-feasible point after " << max_outer << " outer iterations";
      result.message = os.str();
      break;
    }
    const double expected = closed_form_beta(cfg, k);
    if (std::abs(beta - expected) > 1e-12 * expected) {
      throw std::logic_error("penalty schedule drifted from beta0 * alpha^k");
    }
    if (beta > kBetaOverflow) {
      result.status = QpmStatus::beta_overflow;
      std::ostringstream os;
      os << "beta = " << beta << " exceeds " << kBetaOverflow << " at outer iteration " << k;
      result.message = os.str();
      break;
    }

    ev.begin_outer_iteration();
    const double q_xk = xk.q(beta);
    const double q_x0 = p0.q(beta);
    const bool from_x0 = q_x0 < q_xk;
    PenaltyPoint start = from_x0 ? p0 : xk;

    InnerResult inner = cfg.inner_kind == InnerKind::gd
                            ? gd_armijo(ev, beta, std::move(start), rule, cfg.gd, cfg.gd_observer)
                            : tr_solve(ev, beta, std::move(start), rule, cfg.tr, cfg.tr_observer);
    rep.trace.push_back(make_record(k, beta, inner, rule, q_xk, q_x0, from_x0,
                                    ev.counters().per_outer.back()));

    const double q_ref = std::min(q_xk, q_x0);
    if (inner.q_out > q_ref + 1e-12 * (1.0 + std::abs(q_ref))) {
      throw std::logic_error("inner solve increased Q above its warm start");
    }
    if (inner.status != InnerStatus::converged) {
      result.status = QpmStatus::inner_failure;
      std::ostringstream os;
      os << "inner solver " << to_string(inner.status) << " at outer iteration " << k
         << " (beta = " << beta << ", ||grad Q|| = " << inner.grad_norm
         << ", tau = " << rep.trace.back().tau << ")";
      result.message = os.str();
      break;
    }

    xk = std::move(inner.point);
    if (xk.c_norm <= rule.eps0) {
      const Vector lambda = -beta * xk.c;
      result.certificate = certify_kkt(problem, xk.x, lambda, rule);
      if (result.certificate->valid()) {
        result.status = QpmStatus::certified;
        result.message = "certified";
      } else {
        // cannot happen when the inner stop test and the certificate agree
        result.status = QpmStatus::inner_failure;
        result.message = "certificate residuals exceed the targets";
      }
      break;
    }
    beta *= cfg.alpha;
  }

  rep.counters = ev.counters();
  rep.data_errors = ev.data_errors();

  if (bounded) {
    if (cfg.pl && cfg.pl->R > rule.eps0) {
      inputs.sigma_min = cfg.pl->sigma_min;
      inputs.R = cfg.pl->R;
      inputs.L_f0 = estimate_lf0(problem, x0, rep.trace, problem.f_low, cfg.seed);
      inputs.L_f0_estimated = true;
    }
    BoundReport b = compute_bounds(inputs, rule, cfg);
    b.outer_iters_observed = static_cast<long>(rep.trace.size());
    b.beta_final = rep.trace.empty() ? cfg.beta0 : rep.trace.back().beta;
    rep.bounds = std::move(b);
  }

  rep.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<std::string> monitor_invariants(const RunReport& report) {
  std::vector<std::string> out;
  if (!report.bounds) return out;
  const BoundReport& b = *report.bounds;
  const double eps0 = report.config.rule.eps0;
  const double alpha = report.config.alpha;
  const double level = 2.0 * b.inputs.f0 - b.inputs.f_low;

  for (const auto& r : report.trace) {
    if (r.c_norm > eps0 && r.f > level + 1e-12 * (1.0 + std::abs(level))) {
      std::ostringstream os;
      os << "sublevel set: f(x_" << r.k + 1 << ") = " << r.f << " exceeds 2f(x0) - f_low = " << level;
      out.push_back(os.str());
    }
  }

  const long T = static_cast<long>(report.trace.size());
  const double slack = b.inputs.L_f0_estimated ? alpha : 1.0;
  if (T >= 2) {
    const double beta = report.trace[static_cast<std::size_t>(T - 2)].beta;
    if (!(beta < b.beta_max_noPL)) {
      std::ostringstream os;
      os << "beta_{T-2} = " << beta << " is not below beta_max = " << b.beta_max_noPL;
      out.push_back(os.str());
    }
    if (b.beta_max_PL && !(beta < *b.beta_max_PL * slack)) {
      std::ostringstream os;
      os << "beta_{T-2} = " << beta << " is not below the PL bound " << *b.beta_max_PL * slack;
      out.push_back(os.str());
    }
  }
  if (T > static_cast<long>(std::ceil(b.T_hat))) {
    std::ostringstream os;
    os << "outer iterations T = " << T << " exceed ceil(T_hat) = " << std::ceil(b.T_hat);
    out.push_back(os.str());
  }
  if (b.T_tilde) {
    const long cap = static_cast<long>(std::ceil(*b.T_tilde)) + (b.inputs.L_f0_estimated ? 1 : 0);
    if (T > cap) {
      std::ostringstream os;
      os << "outer iterations T = " << T << " exceed the PL bound " << cap;
      out.push_back(os.str());
    }
  }
  return out;
}

}  // namespace qpm
