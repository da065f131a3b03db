#include "qpm/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qpm {

namespace {

std::string describe_point(const Vector& x) {
  std::ostringstream os;
  os.precision(6);
  os << "x[0:" << std::min<Index>(x.size(), 4) << "]=(";
  for (Index i = 0; i < std::min<Index>(x.size(), 4); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << (x.size() > 4 ? ", ...)" : ")");
  return os.str();
}

[[noreturn]] void fail_non_finite(const std::string& oracle, Index coord, const Vector& x) {
  std::ostringstream os;
  os << "non-finite output from " << oracle;
  if (coord >= 0) os << " at coordinate " << coord;
  os << " (" << describe_point(x) << ")";
  throw EvaluationError(os.str());
}

void require_finite(const Vector& v, const std::string& oracle, const Vector& x) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) fail_non_finite(oracle, i, x);
  }
}

void require_finite(const Matrix& mat, const std::string& oracle, const Vector& x) {
  for (Index j = 0; j < mat.cols(); ++j) {
    for (Index i = 0; i < mat.rows(); ++i) {
      if (!std::isfinite(mat(i, j))) fail_non_finite(oracle, i * mat.cols() + j, x);
    }
  }
}

constexpr std::size_t kMaxDataErrors = 32;

double rel_err(double fd, double exact) { return std::abs(fd - exact) / (1.0 + std::abs(exact)); }

}  // namespace

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

void ProblemSpec::validate() const {
  if (n <= 0) throw ConfigError(name + ": decision dimension n must be positive");
  if (m <= 0) throw ConfigError(name + ": constraint dimension m must be positive");
  if (m > n) throw ConfigError(name + ": constraint dimension m must not exceed n");
  if (!objective || !objective_gradient || !constraints || !constraint_jacobian) {
    throw ConfigError(name + ": objective, gradient, constraint and Jacobian oracles are required");
  }
}

Vector ProblemSpec::weighted_hessian_product(const Vector& x, const Vector& w,
                                             const Vector& v) const {
  if (hessian_product) return hessian_product(x, w, v);
  if (!has_dense_hessians()) throw CapabilityError(name + ": no second-order oracle");
  Vector out = objective_hessian(x) * v;
  for (Index i = 0; i < m; ++i) {
    if (w[i] != 0.0) out.noalias() += w[i] * (constraint_hessian(x, i) * v);
  }
  return out;
}

Evaluator::Evaluator(const ProblemSpec& problem) : problem_(&problem) {}

OracleCounts& Evaluator::bucket() {
  if (counters_.per_outer.empty()) counters_.per_outer.emplace_back();
  return counters_.per_outer.back();
}

void Evaluator::begin_outer_iteration() {
  // bucket 0 is opened lazily so evaluations made before the first call
  // (such as the initial point) are attributed to it
  if (counters_.per_outer.empty() || started_) {
    counters_.per_outer.emplace_back();
  }
  started_ = true;
}

void Evaluator::check_lower_bound(double f, const Vector& x) {
  if (std::isfinite(f) && f < problem_->f_low - 1e-12 * (1.0 + std::abs(problem_->f_low))) {
    std::ostringstream os;
    os.precision(17);
    os << problem_->name << ": f=" << f << " below f_low=" << problem_->f_low << " at "
       << describe_point(x);
    if (data_errors_.size() < kMaxDataErrors) data_errors_.push_back(os.str());
  }
}

ValueEval Evaluator::try_values(const Vector& x) {
  ++counters_.total.value_evals;
  ++bucket().value_evals;
  ValueEval out;
  out.f = problem_->objective(x);
  out.c = problem_->constraints(x);
  check_lower_bound(out.f, x);
  return out;
}

ValueEval Evaluator::values(const Vector& x) {
  ValueEval out = try_values(x);
  if (!std::isfinite(out.f)) fail_non_finite("objective", -1, x);
  require_finite(out.c, "constraints", x);
  return out;
}

GradientEval Evaluator::gradients(const Vector& x) {
  ++counters_.total.gradient_evals;
  ++bucket().gradient_evals;
  GradientEval out;
  out.grad_f = problem_->objective_gradient(x);
  out.jacobian = problem_->constraint_jacobian(x);
  require_finite(out.grad_f, "objective gradient", x);
  require_finite(out.jacobian, "constraint Jacobian", x);
  return out;
}

std::pair<ValueEval, GradientEval> Evaluator::first_order(const Vector& x) {
  ++counters_.total.gradient_evals;
  ++bucket().gradient_evals;
  ValueEval v;
  v.f = problem_->objective(x);
  v.c = problem_->constraints(x);
  if (!std::isfinite(v.f)) fail_non_finite("objective", -1, x);
  require_finite(v.c, "constraints", x);
  check_lower_bound(v.f, x);
  GradientEval g;
  g.grad_f = problem_->objective_gradient(x);
  g.jacobian = problem_->constraint_jacobian(x);
  require_finite(g.grad_f, "objective gradient", x);
  require_finite(g.jacobian, "constraint Jacobian", x);
  return {std::move(v), std::move(g)};
}

SecondOrderEval Evaluator::second_order(const Vector& x) {
  if (!problem_->has_dense_hessians()) {
    throw CapabilityError(problem_->name + ": no dense Hessian oracles");
  }
  ++counters_.total.hessian_evals;
  ++bucket().hessian_evals;
  SecondOrderEval out;
  out.values.f = problem_->objective(x);
  out.values.c = problem_->constraints(x);
  if (!std::isfinite(out.values.f)) fail_non_finite("objective", -1, x);
  require_finite(out.values.c, "constraints", x);
  check_lower_bound(out.values.f, x);
  out.gradients.grad_f = problem_->objective_gradient(x);
  out.gradients.jacobian = problem_->constraint_jacobian(x);
  require_finite(out.gradients.grad_f, "objective gradient", x);
  require_finite(out.gradients.jacobian, "constraint Jacobian", x);
  out.hess_f = problem_->objective_hessian(x);
  require_finite(out.hess_f, "objective Hessian", x);
  for (Index i = 0; i < problem_->m; ++i) {
    out.hess_c.push_back(problem_->constraint_hessian(x, i));
    require_finite(out.hess_c.back(), "constraint Hessian " + std::to_string(i), x);
  }
  return out;
}

void Evaluator::count_hessian() {
  if (!problem_->has_hessians()) throw CapabilityError(problem_->name + ": no second-order oracle");
  ++counters_.total.hessian_evals;
  ++bucket().hessian_evals;
}

double default_gradient_step(const Vector& x) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.lpNorm<Eigen::Infinity>());
}

double default_hessian_step(const Vector& x) {
  return std::pow(std::numeric_limits<double>::epsilon(), 0.25) *
         (1.0 + x.lpNorm<Eigen::Infinity>());
}

double check_gradient(const ProblemSpec& problem, const Vector& x, double h) {
  if (!x.allFinite()) throw ConfigError("check_gradient: x must be finite");
  if (!(h > 0.0)) throw ConfigError("check_gradient: step h must be positive");

  const Vector g = problem.objective_gradient(x);
  const Matrix jac = problem.constraint_jacobian(x);
  require_finite(g, "objective gradient", x);
  require_finite(jac, "constraint Jacobian", x);

  double worst = 0.0;
  Vector xp = x;
  Vector xm = x;
  for (Index j = 0; j < problem.n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    const double fp = problem.objective(xp);
    const double fm = problem.objective(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm)) fail_non_finite("objective", j, x);
    worst = std::max(worst, rel_err((fp - fm) / (2.0 * h), g[j]));

    const Vector cp = problem.constraints(xp);
    const Vector cm = problem.constraints(xm);
    require_finite(cp, "constraints", xp);
    require_finite(cm, "constraints", xm);
    for (Index i = 0; i < problem.m; ++i) {
      worst = std::max(worst, rel_err((cp[i] - cm[i]) / (2.0 * h), jac(i, j)));
    }
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return worst;
}

double check_hessian(const ProblemSpec& problem, const Vector& x, double h) {
  if (!problem.has_dense_hessians()) {
    throw CapabilityError(problem.name + ": check_hessian needs dense Hessian oracles");
  }
  if (!x.allFinite()) throw ConfigError("check_hessian: x must be finite");
  if (!(h > 0.0)) throw ConfigError("check_hessian: step h must be positive");

  const Matrix hf = problem.objective_hessian(x);
  require_finite(hf, "objective Hessian", x);
  std::vector<Matrix> hc;
  hc.reserve(static_cast<std::size_t>(problem.m));
  for (Index i = 0; i < problem.m; ++i) {
    hc.push_back(problem.constraint_hessian(x, i));
    require_finite(hc.back(), "constraint Hessian " + std::to_string(i), x);
  }

  double worst = 0.0;
  Vector xp = x;
  Vector xm = x;
  for (Index j = 0; j < problem.n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    const Vector dg = (problem.objective_gradient(xp) - problem.objective_gradient(xm)) / (2.0 * h);
    const Matrix dj = (problem.constraint_jacobian(xp) - problem.constraint_jacobian(xm)) / (2.0 * h);
    require_finite(dg, "objective gradient", x);
    require_finite(dj, "constraint Jacobian", x);
    for (Index r = 0; r < problem.n; ++r) {
      worst = std::max(worst, rel_err(dg[r], hf(r, j)));
      for (Index i = 0; i < problem.m; ++i) {
        worst = std::max(worst, rel_err(dj(i, r), hc[static_cast<std::size_t>(i)](r, j)));
      }
    }
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return worst;
}

}  // namespace qpm
