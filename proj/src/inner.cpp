#include "qpm/inner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qpm {

namespace {

constexpr double kUnderflow = 1e-18;

bool in_open_unit(double v) { return v > 0.0 && v < 1.0; }

/// Positive root t of ‖d + t p‖ = delta.
double boundary_step(const Vector& d, const Vector& p, double delta) {
  const double pp = p.squaredNorm();
  const double dp = d.dot(p);
  const double dd = d.squaredNorm();
  const double disc = std::max(0.0, dp * dp + pp * (delta * delta - dd));
  // stable form of (-dp + sqrt(disc)) / pp
  if (dp <= 0.0) return (-dp + std::sqrt(disc)) / pp;
  return (delta * delta - dd) / (dp + std::sqrt(disc));
}

InnerResult finish(PenaltyPoint&& pt, double beta, double gn, long iters, long accepted,
                   InnerStatus status, long slope_rejections = 0) {
  InnerResult r;
  r.slope_rejections = slope_rejections;
  r.x_out = pt.x;
  r.grad_norm = gn;
  r.q_out = pt.q(beta);
  r.iters = iters;
  r.accepted = accepted;
  r.status = status;
  r.point = std::move(pt);
  return r;
}

}  // namespace

std::string_view to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::converged:
      return "converged";
    case InnerStatus::iteration_cap:
      return "iteration-cap";
    case InnerStatus::stalled:
      return "stalled";
  }
  return "unknown";
}

void GdConfig::validate() const {
  if (!in_open_unit(armijo_slope)) throw ConfigError("armijo_slope must lie in (0, 1)");
  if (!in_open_unit(backtrack_factor)) throw ConfigError("backtrack_factor must lie in (0, 1)");
  if (!(initial_step > 0.0)) throw ConfigError("initial_step must be positive");
  if (!(step_recovery >= 1.0)) throw ConfigError("step_recovery must be at least 1");
  if (max_inner_iters <= 0) throw ConfigError("max_inner_iters must be positive");
  if (!(noise_band >= 0.0 && noise_band < 1e-6)) throw ConfigError("noise_band must lie in [0, 1e-6)");
}

void TrConfig::validate() const {
  if (!(delta0 > 0.0)) throw ConfigError("delta0 must be positive");
  if (!(delta_max >= delta0)) throw ConfigError("delta_max must be at least delta0");
  if (!in_open_unit(eta_accept)) throw ConfigError("eta_accept must lie in (0, 1)");
  if (!(eta_expand > eta_accept && eta_expand < 1.0)) {
    throw ConfigError("eta_expand must lie in (eta_accept, 1)");
  }
  if (!in_open_unit(shrink)) throw ConfigError("shrink must lie in (0, 1)");
  if (!(expand > 1.0)) throw ConfigError("expand must exceed 1");
  if (!in_open_unit(cg_rel_tol)) throw ConfigError("cg_rel_tol must lie in (0, 1)");
  if (max_inner_iters <= 0) throw ConfigError("max_inner_iters must be positive");
  if (!(noise_band >= 0.0 && noise_band < 1e-6)) throw ConfigError("noise_band must lie in [0, 1e-6)");
}

InnerResult gd_armijo(Evaluator& ev, double beta, const Vector& x_start, const ToleranceRule& stop,
                      const GdConfig& cfg, const GdObserver& observer) {
  return gd_armijo(ev, beta, PenaltyPoint::evaluate(ev, x_start), stop, cfg, observer);
}

InnerResult gd_armijo(Evaluator& ev, double beta, PenaltyPoint start, const ToleranceRule& stop,
                      const GdConfig& cfg, const GdObserver& observer) {
  cfg.validate();
  PenaltyPoint pt = std::move(start);
  pt.ensure_gradients(ev);
  Vector g = pt.grad_q(beta);
  double gn = g.norm();
  double q = pt.q(beta);
  if (!std::isfinite(q)) throw EvaluationError("gd_armijo: Q is not finite at the start point");
  const double q_start = q;

  double t = cfg.initial_step;
  long iters = 0;
  long slope_trials = 0;
  long slope_accepts = 0;
  auto done = [&](InnerStatus status) {
    return finish(std::move(pt), beta, gn, iters, iters, status, slope_trials - slope_accepts);
  };
  for (;;) {
    if (gn <= tolerance(stop, pt.c_norm)) {
      return done(InnerStatus::converged);
    }
    if (iters >= cfg.max_inner_iters) {
      return done(InnerStatus::iteration_cap);
    }

    const double gn2 = g.squaredNorm();
    const double band = cfg.noise_band * (1.0 + std::abs(q));
    for (;;) {
      Vector xt = pt.x - t * g;
      // the step no longer moves x in floating point; smaller t will not either
      if (xt == pt.x) return done(InnerStatus::stalled);
      ValueEval v = ev.try_values(xt);
      const double qt = v.f + 0.5 * beta * v.c.squaredNorm();
      // a change inside the band is rounding noise: the value test can pass or
      // fail by luck, so judge the step by the slope at the trial point
      const bool resolvable = cfg.noise_band == 0.0 || std::abs(qt - q) > band;
      if (std::isfinite(qt) && resolvable && qt <= q - cfg.armijo_slope * t * gn2) {
        if (observer) observer(GdStep{q, qt, t, gn2, cfg.armijo_slope, false, 0.0});
        pt = PenaltyPoint::from_values(std::move(xt), std::move(v));
        q = pt.q(beta);
        break;
      }
      if (std::isfinite(qt) && !resolvable && qt <= q_start + band) {
        PenaltyPoint cand = PenaltyPoint::from_values(std::move(xt), std::move(v));
        cand.ensure_gradients(ev);
        const double dot = cand.grad_q(beta).dot(g);
        ++slope_trials;
        if (dot >= -(1.0 - 2.0 * cfg.armijo_slope) * gn2) {
          if (observer) observer(GdStep{q, qt, t, gn2, cfg.armijo_slope, true, dot});
          ++slope_accepts;
          pt = std::move(cand);
          q = pt.q(beta);
          break;
        }
      }
      t *= cfg.backtrack_factor;
      if (t < kUnderflow) {
        return done(InnerStatus::stalled);
      }
    }
    pt.ensure_gradients(ev);
    g = pt.grad_q(beta);
    gn = g.norm();
    ++iters;
    t *= cfg.step_recovery;
  }
}

CgResult truncated_cg(const LinearOperator& hessian, const Vector& g, double delta, double rel_tol,
                      long max_iters) {
  if (!g.allFinite()) throw EvaluationError("truncated_cg: gradient is not finite");
  if (!(delta > 0.0)) throw ConfigError("truncated_cg: radius must be positive");

  const Index n = g.size();
  CgResult out;
  out.step = Vector::Zero(n);
  const double gnorm = g.norm();
  if (gnorm == 0.0) return out;
  if (max_iters < 0) max_iters = std::max<long>(10, 2 * static_cast<long>(n));

  const double tol = rel_tol * gnorm;
  Vector& d = out.step;
  Vector r = g;
  Vector p = -g;
  double rr = r.squaredNorm();
  // model value tracked incrementally: m(d) = gᵀd + ½dᵀHd
  double model = 0.0;

  for (long j = 0; j < max_iters; ++j) {
    const Vector hp = hessian(p);
    const double kappa = p.dot(hp);
    const double rp = r.dot(p);
    if (kappa <= 0.0 || !std::isfinite(kappa)) {
      const double tb = boundary_step(d, p, delta);
      d += tb * p;
      model += tb * rp + 0.5 * tb * tb * kappa;
      out.curvature_flag = true;
      out.boundary_hit = true;
      out.iters = j + 1;
      out.model_value = model;
      return out;
    }
    const double a = rr / kappa;
    if ((d + a * p).norm() >= delta) {
      const double tb = boundary_step(d, p, delta);
      d += tb * p;
      model += tb * rp + 0.5 * tb * tb * kappa;
      out.boundary_hit = true;
      out.iters = j + 1;
      out.model_value = model;
      return out;
    }
    d += a * p;
    model += a * rp + 0.5 * a * a * kappa;
    r += a * hp;
    const double rr_new = r.squaredNorm();
    out.iters = j + 1;
    if (std::sqrt(rr_new) <= tol) break;
    p = -r + (rr_new / rr) * p;
    rr = rr_new;
  }
  out.model_value = model;
  return out;
}

InnerResult tr_solve(Evaluator& ev, double beta, const Vector& x_start, const ToleranceRule& stop,
                     const TrConfig& cfg, const TrObserver& observer) {
  return tr_solve(ev, beta, PenaltyPoint::evaluate(ev, x_start), stop, cfg, observer);
}

InnerResult tr_solve(Evaluator& ev, double beta, PenaltyPoint start, const ToleranceRule& stop,
                     const TrConfig& cfg, const TrObserver& observer) {
  cfg.validate();
  if (!ev.problem().has_hessians()) {
    throw CapabilityError(ev.problem().name + ": trust-region solver needs Hessian oracles");
  }
  PenaltyPoint pt = std::move(start);
  pt.ensure_gradients(ev);
  Vector g = pt.grad_q(beta);
  double gn = g.norm();
  double q = pt.q(beta);
  if (!std::isfinite(q)) throw EvaluationError("tr_solve: Q is not finite at the start point");
  const double q_ceiling = q + cfg.noise_band * (1.0 + std::abs(q));

  double delta = cfg.delta0;
  LinearOperator hess;
  long iters = 0;
  long accepted = 0;
  for (;;) {
    if (gn <= tolerance(stop, pt.c_norm)) {
      return finish(std::move(pt), beta, gn, iters, accepted, InnerStatus::converged);
    }
    if (iters >= cfg.max_inner_iters) {
      return finish(std::move(pt), beta, gn, iters, accepted, InnerStatus::iteration_cap);
    }
    if (!hess) hess = penalty_hessian_operator(ev, pt, beta);

    const double forcing = std::min(cfg.cg_rel_tol, std::sqrt(gn));
    const CgResult cg = truncated_cg(hess, g, delta, forcing);
    const double predicted = -cg.model_value;

    Vector xt = pt.x + cg.step;
    if (xt == pt.x) {
      return finish(std::move(pt), beta, gn, iters, accepted, InnerStatus::stalled);
    }
    ValueEval v = ev.try_values(xt);
    const double qt = v.f + 0.5 * beta * v.c.squaredNorm();
    ++iters;

    double rho = -std::numeric_limits<double>::infinity();
    if (std::isfinite(qt) && predicted > 0.0) {
      const double band = cfg.noise_band * (1.0 + std::abs(q));
      rho = (q - qt + band) / (predicted + band);
    }
    const bool accept = rho >= cfg.eta_accept && qt <= q_ceiling;

    double delta_next = delta;
    if (!accept) {
      delta_next = cfg.shrink * delta;
    } else if (rho >= cfg.eta_expand && cg.boundary_hit) {
      delta_next = std::min(cfg.expand * delta, cfg.delta_max);
    }
    if (observer) observer(TrStep{hess, g, delta, cg, q, qt, rho, accept, delta_next});

    if (accept) {
      ++accepted;
      pt = PenaltyPoint::from_values(std::move(xt), std::move(v));
      pt.ensure_gradients(ev);
      g = pt.grad_q(beta);
      gn = g.norm();
      q = pt.q(beta);
      hess = nullptr;
    }
    delta = delta_next;
    if (delta < kUnderflow) {
      return finish(std::move(pt), beta, gn, iters, accepted, InnerStatus::stalled);
    }
  }
}

}  // namespace qpm
