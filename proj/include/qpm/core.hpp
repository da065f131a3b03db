#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qpm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or problem data detected before any solve starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An oracle produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// A second-order operation was requested on a problem without Hessians.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling found no admissible point.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/**
 * Equality-constrained problem: minimize f(x) subject to c(x) = 0.
 *
 * First-order oracles are mandatory. Second-order information is optional and
 * may be supplied densely (objective_hessian + constraint_hessian) and/or as
 * a product oracle returning (∇²f(x) + Σ w_i ∇²c_i(x)) v.
 */
struct ProblemSpec {
  std::string name;
  Index n = 0;
  Index m = 0;
  /// Lower bound on f over all of R^n; -inf when unknown.
  double f_low = -std::numeric_limits<double>::infinity();

  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> objective_gradient;
  std::function<Vector(const Vector&)> constraints;
  std::function<Matrix(const Vector&)> constraint_jacobian;

  std::function<Matrix(const Vector&)> objective_hessian;
  std::function<Matrix(const Vector&, Index)> constraint_hessian;
  std::function<Vector(const Vector& x, const Vector& w, const Vector& v)> hessian_product;

  bool has_dense_hessians() const { return objective_hessian && constraint_hessian; }
  bool has_hessians() const { return has_dense_hessians() || static_cast<bool>(hessian_product); }

  /// Throws ConfigError if dimensions or mandatory oracles are missing.
  void validate() const;

  /// (∇²f(x) + Σ w_i ∇²c_i(x)) v, from the product oracle or the dense one.
  Vector weighted_hessian_product(const Vector& x, const Vector& w, const Vector& v) const;
};

/// Oracle tallies for one bucket (an outer iteration) or a whole run.
struct OracleCounts {
  std::int64_t value_evals = 0;
  std::int64_t gradient_evals = 0;
  std::int64_t hessian_evals = 0;

  OracleCounts& operator+=(const OracleCounts& o) {
    value_evals += o.value_evals;
    gradient_evals += o.gradient_evals;
    hessian_evals += o.hessian_evals;
    return *this;
  }
  friend OracleCounts operator-(OracleCounts a, const OracleCounts& b) {
    a.value_evals -= b.value_evals;
    a.gradient_evals -= b.gradient_evals;
    a.hessian_evals -= b.hessian_evals;
    return a;
  }
  friend bool operator==(const OracleCounts&, const OracleCounts&) = default;
};

struct OracleCounters {
  OracleCounts total;
  std::vector<OracleCounts> per_outer;
};

/// f and c at a point: the result of one value-oracle call.
struct ValueEval {
  double f = 0.0;
  Vector c;
};

/// ∇f and J at a point: the result of one gradient-oracle call.
struct GradientEval {
  Vector grad_f;
  Matrix jacobian;
};

struct SecondOrderEval {
  ValueEval values;
  GradientEval gradients;
  Matrix hess_f;
  std::vector<Matrix> hess_c;
};

/**
 * Per-run oracle access with call accounting.
 *
 * One joint (f, c) evaluation is one value call, one joint (∇f, J) evaluation
 * is one gradient call, and one request for second-order information at a
 * point is one Hessian call. Counts land in the current outer bucket.
 */
class Evaluator {
 public:
  explicit Evaluator(const ProblemSpec& problem);

  const ProblemSpec& problem() const { return *problem_; }

  /// Throws EvaluationError on non-finite output.
  ValueEval values(const Vector& x);
  /// Same call accounting, but non-finite output is returned rather than thrown.
  ValueEval try_values(const Vector& x);
  GradientEval gradients(const Vector& x);
  /// A full first-order oracle call (values and derivatives); counts as one
  /// gradient call.
  std::pair<ValueEval, GradientEval> first_order(const Vector& x);
  /// A full second-order oracle call with dense Hessians; counts as one
  /// Hessian call. Throws CapabilityError without dense Hessian oracles.
  SecondOrderEval second_order(const Vector& x);
  /// Records a Hessian call for matrix-free use; throws CapabilityError if the
  /// problem has no second-order oracle.
  void count_hessian();

  /// Opens a new per-outer bucket; calls before the first bucket go to bucket 0.
  void begin_outer_iteration();

  const OracleCounters& counters() const { return counters_; }
  /// Points where f(x) < f_low was observed.
  const std::vector<std::string>& data_errors() const { return data_errors_; }

 private:
  OracleCounts& bucket();
  void check_lower_bound(double f, const Vector& x);

  const ProblemSpec* problem_;
  OracleCounters counters_;
  std::vector<std::string> data_errors_;
  bool started_ = false;
};

/// Max over coordinates of |central difference - analytic| / (1 + |analytic|)
/// for ∇f and every row of J.
double check_gradient(const ProblemSpec& problem, const Vector& x, double h);
/// Same metric for ∇²f and each ∇²c_i against central differences of the
/// analytic gradients. Throws CapabilityError without dense Hessians.
double check_hessian(const ProblemSpec& problem, const Vector& x, double h);

/// eps^{1/3} (1 + ‖x‖_∞).
double default_gradient_step(const Vector& x);
/// eps^{1/4} (1 + ‖x‖_∞).
double default_hessian_step(const Vector& x);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace qpm
