#include "qpm/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace qpm {

void ToleranceRule::validate() const {
  if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw ConfigError("eps0 must be a positive finite number");
  if (!(eps1 > 0.0) || !std::isfinite(eps1)) throw ConfigError("eps1 must be a positive finite number");
  if (!(tau_cap >= 0.0)) throw ConfigError("tau_cap must be 0, inf, or a positive number");
}

double tolerance(const ToleranceRule& rule, double c_norm) {
  // exact value of the formula on ‖c‖ ≤ ε₀, without the rounding of (ε₁/ε₀)‖c‖
  if (c_norm <= rule.eps0) return rule.eps1;
  return std::max(rule.eps1, std::min(rule.tau_cap, (rule.eps1 / rule.eps0) * c_norm));
}

PenaltyValue eval_penalty(Evaluator& ev, const Vector& x, double beta) {
  const ValueEval v = ev.values(x);
  PenaltyValue out;
  out.f_val = v.f;
  const double c_sq = v.c.squaredNorm();
  out.c_norm = std::sqrt(c_sq);
  out.beta = beta;
  out.q = v.f + 0.5 * beta * c_sq;
  return out;
}

Vector grad_penalty(Evaluator& ev, const Vector& x, double beta) {
  const auto [v, g] = ev.first_order(x);
  return g.grad_f + g.jacobian.transpose() * (beta * v.c);
}

Matrix hess_penalty(Evaluator& ev, const Vector& x, double beta) {
  const ProblemSpec& p = ev.problem();
  if (p.has_dense_hessians()) {
    const SecondOrderEval s = ev.second_order(x);
    const Matrix& jac = s.gradients.jacobian;
    Matrix h = s.hess_f;
    h.noalias() += beta * (jac.transpose() * jac);
    for (Index i = 0; i < p.m; ++i) {
      const double w = beta * s.values.c[i];
      if (w != 0.0) h += w * s.hess_c[static_cast<std::size_t>(i)];
    }
    return 0.5 * (h + h.transpose());
  }
  if (!p.has_hessians()) throw CapabilityError(p.name + ": hess_penalty needs Hessian oracles");
  ev.count_hessian();
  const Vector c = p.constraints(x);
  const Matrix jac = p.constraint_jacobian(x);
  const Vector w = beta * c;
  Matrix h(p.n, p.n);
  Vector e = Vector::Zero(p.n);
  for (Index j = 0; j < p.n; ++j) {
    e[j] = 1.0;
    h.col(j) = p.weighted_hessian_product(x, w, e);
    e[j] = 0.0;
  }
  h.noalias() += beta * (jac.transpose() * jac);
  return 0.5 * (h + h.transpose());
}

PenaltyPoint PenaltyPoint::evaluate(Evaluator& ev, const Vector& x) {
  return from_values(x, ev.values(x));
}

PenaltyPoint PenaltyPoint::from_values(Vector x, ValueEval&& v) {
  PenaltyPoint p;
  p.x = std::move(x);
  p.f = v.f;
  p.c = std::move(v.c);
  p.c_sq = p.c.squaredNorm();
  p.c_norm = std::sqrt(p.c_sq);
  return p;
}

void PenaltyPoint::ensure_gradients(Evaluator& ev) {
  if (!grads) grads = ev.gradients(x);
}

Vector PenaltyPoint::grad_q(double beta) const {
  return grads->grad_f + grads->jacobian.transpose() * (beta * c);
}

LinearOperator penalty_hessian_operator(Evaluator& ev, const PenaltyPoint& point, double beta) {
  const ProblemSpec& p = ev.problem();
  ev.count_hessian();
  const Matrix& jac = point.grads->jacobian;

  if (!p.hessian_product) {
    // no product oracle: materialize once per point
    auto h = std::make_shared<Matrix>(p.objective_hessian(point.x));
    h->noalias() += beta * (jac.transpose() * jac);
    for (Index i = 0; i < p.m; ++i) {
      const double w = beta * point.c[i];
      if (w != 0.0) *h += w * p.constraint_hessian(point.x, i);
    }
    return [h](const Vector& v) -> Vector { return (*h) * v; };
  }

  auto x = std::make_shared<const Vector>(point.x);
  auto w = std::make_shared<const Vector>(beta * point.c);
  auto j = std::make_shared<const Matrix>(jac);
  const ProblemSpec* prob = &p;
  return [prob, x, w, j, beta](const Vector& v) -> Vector {
    Vector out = prob->hessian_product(*x, *w, v);
    out.noalias() += beta * (j->transpose() * ((*j) * v));
    return out;
  };
}

}  // namespace qpm
