#include "doctest.h"
#include "support.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "qpm/problems.hpp"

using namespace qpm;

namespace {

/// ‖Jᵀc‖ / ‖c‖ at x.
double pl_ratio(const ConstraintBlock& c, const Vector& x) {
  const Vector v = c.value(x);
  return (c.jacobian(x).transpose() * v).norm() / v.norm();
}

Vector gaussian(Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST_CASE("Rosenbrock vanishes on its unconstrained minimizer") {
  const Objective f = rosenbrock_objective(8);
  CHECK(f.value(Vector::Ones(8)) == 0.0);
  CHECK(f.gradient(Vector::Ones(8)).norm() == 0.0);
  CHECK(f.f_low == 0.0);
  // pairs are (x₁,x₂), (x₃,x₄), ...
  const Objective f4 = rosenbrock_objective(4);
  const Vector x = (Vector(4) << 0.5, -0.3, 2.0, 1.0).finished();
  CHECK(f4.value(x) == doctest::Approx(testing::rosen2(0.5, -0.3) + testing::rosen2(2.0, 1.0)));
  CHECK_THROWS_AS(rosenbrock_objective(3), ConfigError);
}

TEST_CASE("sphere starting point sits at eps0/sqrt2") {
  for (Index n : {2, 10, 1000}) {
    for (double eps0 : {1e-1, 1e-3, 1e-6}) {
      CAPTURE(n);
      CAPTURE(eps0);
      const Vector x0 = make_x0_sphere(n, eps0);
      const double target = eps0 / std::sqrt(2.0);
      const double c = std::abs(x0.squaredNorm() - 1.0);
      // ‖x‖² − 1 cancels down to ε₀/√2: the rounding of x₀ and of the n-term
      // sum leaves an absolute error of up to n ulps of 1.
      const double sum_err = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
      CHECK(std::abs(c - target) <= 1e-14 * target + sum_err);
      CHECK(x0.maxCoeff() == x0.minCoeff());
    }
  }
  const Vector tiny = make_x0_sphere(6, 1e-300);
  CHECK(tiny.norm() == doctest::Approx(1.0).epsilon(1e-15));

  const Vector x = make_x0_sphere(2, std::sqrt(2.0));
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-15));
  const auto [prob, pl] = make_rosenbrock_sphere(2);
  CHECK(prob.constraints(x)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("affine constants from singular values") {
  Matrix padded = Matrix::Zero(3, 5);
  padded.leftCols(3) = Matrix::Identity(3, 3);
  CHECK(affine_constraint(padded, Vector::Zero(3)).pl.sigma_min == doctest::Approx(1.0));

  Matrix d(2, 2);
  d << 3, 0, 0, 2;
  const ConstraintBlock c = affine_constraint(d, Vector::Zero(2));
  CHECK(c.pl.sigma_min == doctest::Approx(2.0));
  CHECK(c.pl.R >= 1e300);

  Matrix rank1(2, 3);
  rank1 << 1, 2, 3, 2, 4, 6;
  CHECK_THROWS_AS(affine_constraint(rank1, Vector::Zero(2)), ConfigError);
  CHECK(smallest_singular_value(d) == doctest::Approx(2.0));
}

TEST_CASE("binary constraint") {
  const ConstraintBlock c = binary_constraint(4);
  CHECK(c.value((Vector(4) << 0, 1, 1, 0).finished()).norm() == 0.0);

  const Vector half = Vector::Constant(4, 0.5);
  CHECK(c.value(half).isApprox(Vector::Constant(4, 0.25)));
  CHECK(c.jacobian(half).norm() == 0.0);
  CHECK(c.value(half).norm() > c.pl.R);  // outside the tube, so no contradiction

  CHECK(c.pl.sigma_min == doctest::Approx(std::sqrt(0.2)));
  CHECK_THROWS_AS(binary_constraint(4, 0.25), ConfigError);
  CHECK_THROWS_AS(binary_constraint(4, 0.0), ConfigError);
}

TEST_CASE("Stiefel constraint") {
  Rng rng(4);
  const Index n = 6, p = 2;
  const ConstraintBlock c = stiefel_constraint(n, p);
  CHECK(c.m == 3);

  const Matrix g = gaussian(n * p, rng).reshaped(n, p);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(n, p);
  CHECK(c.value(q.reshaped()).norm() <= 1e-15);

  // ‖c(X)‖ is the Frobenius norm of XᵀX − I.
  const Matrix x = g * 0.3;
  const Matrix gram = x.transpose() * x - Matrix::Identity(p, p);
  CHECK(c.value(x.reshaped()).norm() == doctest::Approx(gram.norm()).epsilon(1e-14));

  const ConstraintBlock one = stiefel_constraint(4, 1);
  const ConstraintBlock sphere = sphere_constraint(4);
  const Vector v = gaussian(4, rng);
  CHECK(one.value(v)[0] == doctest::Approx(sphere.value(v)[0]).epsilon(1e-15));
  CHECK(c.pl.sigma_min == doctest::Approx(2.0 * std::sqrt(0.5)));
  CHECK_THROWS_AS(stiefel_constraint(2, 3), ConfigError);
}

TEST_CASE("stacking takes the smallest constants") {
  Matrix a2(1, 1), a3(1, 1);
  a2 << 2.0;
  a3 << 3.0;
  const ConstraintBlock b2 = embed_constraint(affine_constraint(a2, Vector::Zero(1)), 0, 2);
  const ConstraintBlock b3 = embed_constraint(affine_constraint(a3, Vector::Zero(1)), 1, 2);
  const ConstraintBlock s = stack_constraints({b2, b3});
  CHECK(s.pl.sigma_min == doctest::Approx(2.0));
  CHECK(s.m == 2);

  const ConstraintBlock single = stack_constraints({b2});
  const Vector x = (Vector(2) << 0.4, -1.1).finished();
  CHECK(single.value(x) == b2.value(x));
  CHECK(single.jacobian(x) == b2.jacobian(x));
  CHECK(single.pl.sigma_min == b2.pl.sigma_min);

  CHECK_THROWS_AS(stack_constraints({}), ConfigError);
}

TEST_CASE("sphere and affine blocks stacked: brute-force PL ratio") {
  Rng rng(8);
  Matrix a(1, 2);
  a << 0.6, 0.8;  // σ = 1
  const ConstraintBlock sphere = embed_constraint(sphere_constraint(3), 0, 5);
  const ConstraintBlock plane = embed_constraint(affine_constraint(a, Vector::Zero(1)), 3, 5);
  const ConstraintBlock s = stack_constraints({sphere, plane});
  CHECK(s.pl.sigma_min == doctest::Approx(1.0));  // min(2√0.5, 1)
  CHECK(s.pl.R == doctest::Approx(0.5));

  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = kUnboundedRadius;
  long kept = 0;
  for (int i = 0; i < 20000; ++i) {
    Vector x(5);
    x.head(3) = gaussian(3, rng).normalized() * std::sqrt(1.0 + u(rng));
    x.tail(2) = gaussian(2, rng, 0.3);
    const Vector v = s.value(x);
    if (v.norm() == 0.0 || v.norm() > s.pl.R) continue;
    ++kept;
    worst = std::min(worst, pl_ratio(s, x));
  }
  CHECK(kept > 1000);
  CHECK(worst >= s.pl.sigma_min - 1e-6);
}

TEST_CASE("estimate_pl on the analytic families") {
  Rng rng(2);
  SUBCASE("affine") {
    const Matrix a = gaussian(12, rng).reshaped(3, 4);
    const auto [prob, pl] = make_affine(a, Vector::Zero(3), diagonal_quadratic_objective(Vector::Zero(4), Vector::Ones(4)));
    const PLEstimate e = estimate_pl(prob, 1.0, 20000, box_sampler(4), 5);
    const double s = Eigen::JacobiSVD<Matrix>(a).singularValues().minCoeff();
    CHECK(e.sigma_hat >= s - 1e-8);
    CHECK(pl.sigma_min == doctest::Approx(s).epsilon(1e-12));
  }
  SUBCASE("binary") {
    const auto [prob, pl] = make_binary(3, diagonal_quadratic_objective(Vector::Zero(3), Vector::Ones(3)));
    const PLEstimate e = estimate_pl(prob, 0.2, 20000, box_sampler(3, -0.5, 1.5), 5);
    CHECK(e.accepted > 100);
    CHECK(e.sigma_hat >= std::sqrt(1.0 - 0.8) - 1e-8);
  }
  SUBCASE("sphere") {
    const auto [prob, pl] = make_rosenbrock_sphere(4);
    const PLEstimate e = estimate_pl(prob, 0.5, 20000, sphere_tube_sampler(4, 0.5), 5);
    CHECK(e.accepted == e.drawn);
    CHECK(e.sigma_hat >= std::sqrt(2.0) - 1e-6);
    // the tube sampler reaches the inner wall, where the bound is tight
    CHECK(e.sigma_hat <= std::sqrt(2.0) + 1e-2);
  }
  SUBCASE("stiefel") {
    const auto [prob, pl] = make_stiefel(6, 2, trace_objective(Matrix::Identity(6, 6), 2));
    const Sampler near = near_feasible_sampler([](Rng& r) {
      const Matrix g = gaussian(12, r).reshaped(6, 2);
      return Vector((Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(6, 2)).reshaped());
    }, 1e-4, 0.3);
    const PLEstimate e = estimate_pl(prob, 0.5, 100000, near, 5);
    CHECK(e.sigma_hat >= 2.0 * std::sqrt(0.5) - 1e-6);
  }
}

TEST_CASE("estimate_pl is seeded and fails loudly with no admissible sample") {
  const auto [prob, pl] = make_rosenbrock_sphere(4);
  const PLEstimate a = estimate_pl(prob, 0.5, 500, box_sampler(4), 9);
  const PLEstimate b = estimate_pl(prob, 0.5, 500, box_sampler(4), 9);
  CHECK(a.sigma_hat == b.sigma_hat);
  CHECK(a.worst_point == b.worst_point);
  CHECK_THROWS_AS(estimate_pl(prob, 0.5, 50, box_sampler(4, 5.0, 6.0), 9), SamplingError);
}

TEST_CASE("samplers stay in their sets") {
  Rng rng(1);
  const Sampler box = box_sampler(3, -1.0, 2.0);
  const Sampler tube = sphere_tube_sampler(5, 0.3);
  for (int i = 0; i < 1000; ++i) {
    const Vector b = box(rng);
    CHECK(b.minCoeff() >= -1.0);
    CHECK(b.maxCoeff() <= 2.0);
    CHECK(std::abs(tube(rng).squaredNorm() - 1.0) <= 0.3 + 1e-12);
  }
}

TEST_CASE("registry: derivatives, feasible starts, names") {
  Rng rng(17);
  for (const auto& name : registered_problems()) {
    CAPTURE(name);
    const ProblemSize size{name == "stiefel-trace" ? 5 : 8, 0, 2};
    const TestProblem tp = make_registered(name, size, 1e-3, 1);
    CHECK_NOTHROW(tp.problem.validate());
    CHECK(tp.problem.has_dense_hessians());
    CHECK(std::isfinite(tp.problem.f_low));
    CHECK(tp.problem.constraints(tp.x0).norm() <= 1e-3 / std::sqrt(2.0) * (1.0 + 1e-6));
    CHECK(tp.analytic_sigma(tp.pl.R) == doctest::Approx(tp.pl.sigma_min));
    for (int k = 0; k < 5; ++k) {
      const Vector x = tp.x0 + gaussian(tp.problem.n, rng, 0.5);
      CHECK(check_gradient(tp.problem, x, default_gradient_step(x)) <= 1e-5);
      CHECK(check_hessian(tp.problem, x, default_hessian_step(x)) <= 1e-4);
    }
  }
  CHECK_THROWS_AS(make_registered("nope", {}, 1e-3, 0), ConfigError);
  CHECK_THROWS_AS(make_registered("stacked-demo", {6, 0, 2}, 1e-3, 0), ConfigError);
}

TEST_CASE("registry: same seed, same instance") {
  const TestProblem a = make_registered("affine-quadratic", {10, 0, 2}, 1e-3, 42);
  const TestProblem b = make_registered("affine-quadratic", {10, 0, 2}, 1e-3, 42);
  const TestProblem c = make_registered("affine-quadratic", {10, 0, 2}, 1e-3, 43);
  const Vector x = Vector::LinSpaced(10, -1, 1);
  CHECK(a.problem.objective(x) == b.problem.objective(x));
  CHECK(a.x0 == b.x0);
  CHECK(a.x0 != c.x0);
  // orthonormal rows: the PL constant is 1
  CHECK(a.pl.sigma_min == doctest::Approx(1.0).epsilon(1e-12));
}
