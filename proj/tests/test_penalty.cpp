#include "doctest.h"
#include "support.hpp"

#include <Eigen/Dense>
#include <limits>
#include <random>

#include "qpm/penalty.hpp"
#include "qpm/problems.hpp"

using namespace qpm;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("tolerance examples") {
  const ToleranceRule uncapped{1e-3, 1e-3, kInf};
  CHECK(tolerance(uncapped, 0.5) == doctest::Approx(0.5));
  CHECK(tolerance(uncapped, 1e-3) == 1e-3);
  CHECK(tolerance(uncapped, 0.0) == 1e-3);

  const ToleranceRule capped{1e-3, 1e-3, 1e-2};
  CHECK(tolerance(capped, 0.5) == 1e-2);

  const ToleranceRule fixed{1e-3, 1e-3, 0.0};
  CHECK(tolerance(fixed, 0.5) == 1e-3);
  CHECK(tolerance(fixed, 1e6) == 1e-3);
}

TEST_CASE("tolerance equals eps1 on the feasible tube and never drops below it") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double cap : {0.0, 1e-2, kInf}) {
    for (int i = 0; i < 200; ++i) {
      const double eps0 = std::pow(10.0, -1.0 - 6.0 * u(rng));
      const double eps1 = std::pow(10.0, -1.0 - 6.0 * u(rng));
      const ToleranceRule rule{eps0, eps1, std::max(cap, cap > 0 ? eps1 : 0.0)};
      const double inside = eps0 * u(rng);
      CHECK(tolerance(rule, inside) == eps1);
      CHECK(tolerance(rule, eps0) == eps1);
      CHECK(tolerance(rule, eps0 * (1.0 + 10.0 * u(rng))) >= eps1);
    }
  }
}

TEST_CASE("tolerance is non-decreasing in the violation") {
  for (double cap : {0.0, 5e-3, kInf}) {
    const ToleranceRule rule{1e-4, 1e-5, cap};
    double prev = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double c = std::pow(10.0, -8.0 + i * 0.025);
      const double t = tolerance(rule, c);
      CHECK(t >= prev);
      prev = t;
    }
  }
}

TEST_CASE("tolerance cap regimes side by side") {
  const double eps0 = 1e-2, eps1 = 1e-4, c = 10.0;
  CHECK(tolerance({eps0, eps1, 0.0}, c) == eps1);
  CHECK(tolerance({eps0, eps1, 3e-3}, c) == 3e-3);
  CHECK(tolerance({eps0, eps1, kInf}, c) == doctest::Approx(eps1 / eps0 * c));
}

TEST_CASE("tolerance rule validation") {
  CHECK_THROWS_AS((ToleranceRule{0.0, 1e-3, kInf}.validate()), ConfigError);
  CHECK_THROWS_AS((ToleranceRule{1e-3, -1.0, kInf}.validate()), ConfigError);
  CHECK_THROWS_AS((ToleranceRule{1e-3, 1e-3, -1.0}.validate()), ConfigError);
  CHECK_NOTHROW((ToleranceRule{1e-3, 1e-3, 0.0}.validate()));
  CHECK(ToleranceRule::fixed(1e-5).tau_cap == 0.0);
}

TEST_CASE("penalty value on Rosenbrock-sphere at (1,1)") {
  const auto [prob, pl] = make_rosenbrock_sphere(2);
  Evaluator ev(prob);
  const Vector x = Vector::Ones(2);
  const PenaltyValue v = eval_penalty(ev, x, 4.0);
  CHECK(v.f_val == 0.0);
  CHECK(v.c_norm == doctest::Approx(1.0));
  CHECK(v.q == doctest::Approx(2.0));
  CHECK(ev.counters().total.value_evals == 1);

  CHECK(eval_penalty(ev, x, 0.0).q == v.f_val);
}

TEST_CASE("penalty gradient on Rosenbrock-sphere at (1,1)") {
  const auto [prob, pl] = make_rosenbrock_sphere(2);
  Evaluator ev(prob);
  const Vector g = grad_penalty(ev, Vector::Ones(2), 1.0);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(2.0));
}

TEST_CASE("feasible points: penalty reduces to the objective") {
  const auto [prob, pl] = make_rosenbrock_sphere(4);
  Evaluator ev(prob);
  const Vector x = Vector::Constant(4, 0.5);  // ‖x‖ = 1
  REQUIRE(prob.constraints(x).norm() == 0.0);
  for (double beta : {0.0, 1.0, 1e6}) {
    CHECK(eval_penalty(ev, x, beta).q == prob.objective(x));
    CHECK((grad_penalty(ev, x, beta) - prob.objective_gradient(x)).norm() == 0.0);
  }
}

TEST_CASE("penalty Hessian: affine constraints add AᵀA") {
  Matrix a(2, 3);
  a << 1, 0, 2, 0, 1, -1;
  const Vector d = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const auto [prob, pl] = make_affine(a, Vector::Zero(2), diagonal_quadratic_objective(Vector::Zero(3), d));
  Evaluator ev(prob);
  const Matrix h = hess_penalty(ev, (Vector(3) << 0.1, 0.2, 0.3).finished(), 1.0);
  const Matrix expected = Matrix(d.asDiagonal()) + a.transpose() * a;
  CHECK((h - expected).norm() <= 1e-14);
}

TEST_CASE("penalty Hessian: sphere term 4xxᵀ + 2βc I") {
  const Objective f = diagonal_quadratic_objective(Vector::Zero(3), Vector::Ones(3));
  const ProblemSpec prob = make_problem("s", f, sphere_constraint(3));
  Evaluator ev(prob);

  const Vector on = Vector::Unit(3, 1);
  CHECK((hess_penalty(ev, on, 1.0) - (Matrix::Identity(3, 3) + 4.0 * on * on.transpose())).norm() <= 1e-14);

  const Vector off = (Vector(3) << 1.0, 1.0, 0.0).finished();  // c = 1
  const double beta = 3.0;
  const Matrix expected =
      Matrix::Identity(3, 3) + beta * (4.0 * off * off.transpose() + 2.0 * 1.0 * Matrix::Identity(3, 3));
  CHECK((hess_penalty(ev, off, beta) - expected).norm() <= 1e-12);
}

TEST_CASE("penalty derivatives on every registered problem") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (const auto& name : registered_problems()) {
    CAPTURE(name);
    const ProblemSize size{name == "stiefel-trace" ? 5 : 8, 0, 2};
    const TestProblem tp = make_registered(name, size, 1e-3, 3);
    Evaluator ev(tp.problem);
    const Index n = tp.problem.n;
    for (int trial = 0; trial < 5; ++trial) {
      Vector x = tp.x0;
      for (Index i = 0; i < n; ++i) x[i] += 0.3 * gauss(rng);
      const double beta = 10.0;
      const Vector g = grad_penalty(ev, x, beta);
      const Matrix h = hess_penalty(ev, x, beta);
      CHECK((h - h.transpose()).norm() == 0.0);

      // Central differences of Q and ∇Q.
      const double step = 1e-6 * (1.0 + x.lpNorm<Eigen::Infinity>());
      double worst_g = 0.0, worst_h = 0.0;
      for (Index i = 0; i < n; ++i) {
        Vector xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        const double fd = (eval_penalty(ev, xp, beta).q - eval_penalty(ev, xm, beta).q) / (2 * step);
        worst_g = std::max(worst_g, testing::rel_diff(fd, g[i]));
        const Vector hd = (grad_penalty(ev, xp, beta) - grad_penalty(ev, xm, beta)) / (2 * step);
        for (Index j = 0; j < n; ++j) worst_h = std::max(worst_h, testing::rel_diff(hd[j], h(j, i)));
      }
      CHECK(worst_g <= 1e-5);
      CHECK(worst_h <= 1e-4);
    }
  }
}

TEST_CASE("penalty point re-prices for a new beta without oracle calls") {
  const auto [prob, pl] = make_rosenbrock_sphere(6);
  Evaluator ev(prob);
  const Vector x = Vector::LinSpaced(6, -0.4, 0.9);
  PenaltyPoint p = PenaltyPoint::evaluate(ev, x);
  p.ensure_gradients(ev);
  p.ensure_gradients(ev);
  const OracleCounts before = ev.counters().total;
  CHECK(before.gradient_evals == 1);

  for (double beta : {0.0, 2.5, 1e4}) {
    const PenaltyValue v = eval_penalty(ev, x, beta);
    CHECK(p.q(beta) == doctest::Approx(v.q).epsilon(1e-15));
    CHECK((p.grad_q(beta) - grad_penalty(ev, x, beta)).norm() == 0.0);
  }
  CHECK(ev.counters().total.value_evals > before.value_evals);
}

TEST_CASE("matrix-free Hessian agrees with the dense one") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (const auto& name : registered_problems()) {
    CAPTURE(name);
    const ProblemSize size{name == "stiefel-trace" ? 5 : 8, 0, 2};
    const TestProblem tp = make_registered(name, size, 1e-3, 9);
    Evaluator ev(tp.problem);
    const Index n = tp.problem.n;
    Vector x = tp.x0;
    for (Index i = 0; i < n; ++i) x[i] += 0.2 * gauss(rng);
    PenaltyPoint p = PenaltyPoint::evaluate(ev, x);
    p.ensure_gradients(ev);
    const double beta = 7.0;
    const LinearOperator op = penalty_hessian_operator(ev, p, beta);
    const Matrix h = hess_penalty(ev, x, beta);
    for (int probe = 0; probe < 10; ++probe) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v[i] = gauss(rng);
      const Vector hv = h * v;
      CHECK((op(v) - hv).norm() <= 1e-10 * (1.0 + hv.norm()));
    }
  }
}
