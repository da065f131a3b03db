#include "qpm/problems.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace qpm {

namespace {

const double kSqrt2 = std::sqrt(2.0);

Vector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(rng);
  }
  return a;
}

Vector uniform_vector(Index n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = unif(rng);
  return v;
}

/// Random n×p matrix with orthonormal columns, flattened column-major.
Vector random_orthonormal(Index n, Index p, Rng& rng) {
  const Matrix g = gaussian_matrix(n, p, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
  return Eigen::Map<const Vector>(q.data(), n * p);
}

Matrix orthonormal_rows(Index m, Index n, Rng& rng) {
  return Eigen::Map<const Matrix>(random_orthonormal(n, m, rng).data(), n, m).transpose();
}

/// (i, j) pairs of the upper triangle of a p×p matrix, row by row.
std::vector<std::pair<Index, Index>> upper_pairs(Index p) {
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i; j < p; ++j) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace

double smallest_singular_value(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

// ---------------------------------------------------------------------------
// constraint blocks

ConstraintBlock sphere_constraint(Index n) {
  if (n <= 0) throw ConfigError("sphere constraint: n must be positive");
  ConstraintBlock b;
  b.n = n;
  b.m = 1;
  b.value = [](const Vector& x) {
    Vector c(1);
    c[0] = x.squaredNorm() - 1.0;
    return c;
  };
  b.jacobian = [](const Vector& x) -> Matrix { return 2.0 * x.transpose(); };
  b.hessian = [n](const Vector&, Index) -> Matrix { return 2.0 * Matrix::Identity(n, n); };
  b.hessian_product = [](const Vector&, const Vector& w, const Vector& v) -> Vector {
    return 2.0 * w[0] * v;
  };
  b.pl = {0.5, 2.0 * std::sqrt(0.5), PLRegion::Provenance::analytic};
  return b;
}

ConstraintBlock affine_constraint(const Matrix& a, const Vector& rhs) {
  if (a.rows() <= 0 || a.cols() <= 0) throw ConfigError("affine constraint: A must be non-empty");
  if (a.rows() > a.cols()) throw ConfigError("affine constraint: A must have at most as many rows as columns");
  if (rhs.size() != a.rows()) throw ConfigError("affine constraint: b must have one entry per row of A");
  Eigen::JacobiSVD<Matrix> svd(a);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-10 * smax)) {
    std::ostringstream os;
    os << "affine constraint: A is rank deficient (sigma_min=" << smin << ", sigma_max=" << smax << ")";
    throw ConfigError(os.str());
  }
  auto mat = std::make_shared<const Matrix>(a);
  auto vec = std::make_shared<const Vector>(rhs);
  const Index n = a.cols();
  ConstraintBlock b;
  b.n = n;
  b.m = a.rows();
  b.value = [mat, vec](const Vector& x) -> Vector { return (*mat) * x - *vec; };
  b.jacobian = [mat](const Vector&) -> Matrix { return *mat; };
  b.hessian = [n](const Vector&, Index) -> Matrix { return Matrix::Zero(n, n); };
  b.hessian_product = [n](const Vector&, const Vector&, const Vector&) -> Vector {
    return Vector::Zero(n);
  };
  b.pl = {kUnboundedRadius, smin, PLRegion::Provenance::analytic};
  return b;
}

ConstraintBlock binary_constraint(Index n, double R) {
  if (n <= 0) throw ConfigError("binary constraint: n must be positive");
  if (!(R > 0.0 && R < 0.25)) throw ConfigError("binary constraint: R must lie in (0, 1/4)");
  ConstraintBlock b;
  b.n = n;
  b.m = n;
  b.value = [](const Vector& x) -> Vector { return x.array() * (1.0 - x.array()); };
  b.jacobian = [](const Vector& x) -> Matrix {
    return (1.0 - 2.0 * x.array()).matrix().asDiagonal();
  };
  b.hessian = [n](const Vector&, Index i) -> Matrix {
    Matrix h = Matrix::Zero(n, n);
    h(i, i) = -2.0;
    return h;
  };
  b.hessian_product = [](const Vector&, const Vector& w, const Vector& v) -> Vector {
    return -2.0 * w.cwiseProduct(v);
  };
  b.pl = {R, std::sqrt(1.0 - 4.0 * R), PLRegion::Provenance::analytic};
  return b;
}

ConstraintBlock stiefel_constraint(Index n, Index p, double R) {
  if (n <= 0 || p <= 0) throw ConfigError("stiefel constraint: n and p must be positive");
  if (p > n) throw ConfigError("stiefel constraint: p must not exceed n");
  if (!(R > 0.0 && R < 1.0)) throw ConfigError("stiefel constraint: R must lie in (0, 1)");
  auto pairs = std::make_shared<const std::vector<std::pair<Index, Index>>>(upper_pairs(p));
  const Index m = static_cast<Index>(pairs->size());
  ConstraintBlock b;
  b.n = n * p;
  b.m = m;
  b.value = [n, pairs](const Vector& x) -> Vector {
    Vector c(static_cast<Index>(pairs->size()));
    for (std::size_t k = 0; k < pairs->size(); ++k) {
      const auto [i, j] = (*pairs)[k];
      const double dot = x.segment(i * n, n).dot(x.segment(j * n, n));
      c[static_cast<Index>(k)] = (i == j) ? dot - 1.0 : kSqrt2 * dot;
    }
    return c;
  };
  b.jacobian = [n, p, pairs](const Vector& x) -> Matrix {
    Matrix jac = Matrix::Zero(static_cast<Index>(pairs->size()), n * p);
    for (std::size_t k = 0; k < pairs->size(); ++k) {
      const auto [i, j] = (*pairs)[k];
      const auto row = static_cast<Index>(k);
      if (i == j) {
        jac.block(row, i * n, 1, n) = 2.0 * x.segment(i * n, n).transpose();
      } else {
        jac.block(row, i * n, 1, n) = kSqrt2 * x.segment(j * n, n).transpose();
        jac.block(row, j * n, 1, n) = kSqrt2 * x.segment(i * n, n).transpose();
      }
    }
    return jac;
  };
  b.hessian = [n, p, pairs](const Vector&, Index k) -> Matrix {
    Matrix h = Matrix::Zero(n * p, n * p);
    const auto [i, j] = (*pairs)[static_cast<std::size_t>(k)];
    if (i == j) {
      h.block(i * n, i * n, n, n) = 2.0 * Matrix::Identity(n, n);
    } else {
      h.block(i * n, j * n, n, n) = kSqrt2 * Matrix::Identity(n, n);
      h.block(j * n, i * n, n, n) = kSqrt2 * Matrix::Identity(n, n);
    }
    return h;
  };
  b.hessian_product = [n, p, pairs](const Vector&, const Vector& w, const Vector& v) -> Vector {
    Vector out = Vector::Zero(n * p);
    for (std::size_t k = 0; k < pairs->size(); ++k) {
      const auto [i, j] = (*pairs)[k];
      const double wk = w[static_cast<Index>(k)];
      if (i == j) {
        out.segment(i * n, n) += 2.0 * wk * v.segment(i * n, n);
      } else {
        out.segment(i * n, n) += kSqrt2 * wk * v.segment(j * n, n);
        out.segment(j * n, n) += kSqrt2 * wk * v.segment(i * n, n);
      }
    }
    return out;
  };
  b.pl = {R, 2.0 * std::sqrt(1.0 - R), PLRegion::Provenance::analytic};
  return b;
}

ConstraintBlock embed_constraint(const ConstraintBlock& block, Index offset, Index n_total) {
  if (offset < 0 || offset + block.n > n_total) {
    throw ConfigError("embed_constraint: block does not fit in the target dimension");
  }
  const Index nb = block.n;
  const Index m = block.m;
  ConstraintBlock out;
  out.n = n_total;
  out.m = m;
  out.pl = block.pl;
  out.value = [block, offset, nb](const Vector& x) { return block.value(x.segment(offset, nb)); };
  out.jacobian = [block, offset, nb, n_total, m](const Vector& x) -> Matrix {
    Matrix jac = Matrix::Zero(m, n_total);
    jac.middleCols(offset, nb) = block.jacobian(x.segment(offset, nb));
    return jac;
  };
  if (block.hessian) {
    out.hessian = [block, offset, nb, n_total](const Vector& x, Index i) -> Matrix {
      Matrix h = Matrix::Zero(n_total, n_total);
      h.block(offset, offset, nb, nb) = block.hessian(x.segment(offset, nb), i);
      return h;
    };
  }
  if (block.hessian_product) {
    out.hessian_product = [block, offset, nb, n_total](const Vector& x, const Vector& w,
                                                       const Vector& v) -> Vector {
      Vector r = Vector::Zero(n_total);
      r.segment(offset, nb) = block.hessian_product(x.segment(offset, nb), w, v.segment(offset, nb));
      return r;
    };
  }
  return out;
}

ConstraintBlock stack_constraints(const std::vector<ConstraintBlock>& parts) {
  if (parts.empty()) throw ConfigError("stack_constraints: at least one block is required");
  const Index n = parts.front().n;
  Index m = 0;
  bool second_order = true;
  bool products = true;
  ConstraintBlock out;
  out.pl = parts.front().pl;
  for (const auto& p : parts) {
    if (p.n != n) {
      std::ostringstream os;
      os << "stack_constraints: dimension mismatch (" << p.n << " vs " << n << ")";
      throw ConfigError(os.str());
    }
    m += p.m;
    second_order = second_order && static_cast<bool>(p.hessian);
    products = products && static_cast<bool>(p.hessian_product);
    out.pl.R = std::min(out.pl.R, p.pl.R);
    out.pl.sigma_min = std::min(out.pl.sigma_min, p.pl.sigma_min);
    if (p.pl.provenance == PLRegion::Provenance::estimated) {
      out.pl.provenance = PLRegion::Provenance::estimated;
    }
  }
  if (parts.size() == 1) return parts.front();

  out.n = n;
  out.m = m;
  out.value = [parts, m](const Vector& x) -> Vector {
    Vector c(m);
    Index row = 0;
    for (const auto& p : parts) {
      c.segment(row, p.m) = p.value(x);
      row += p.m;
    }
    return c;
  };
  out.jacobian = [parts, m, n](const Vector& x) -> Matrix {
    Matrix jac(m, n);
    Index row = 0;
    for (const auto& p : parts) {
      jac.middleRows(row, p.m) = p.jacobian(x);
      row += p.m;
    }
    return jac;
  };
  if (second_order) {
    out.hessian = [parts](const Vector& x, Index i) -> Matrix {
      for (const auto& p : parts) {
        if (i < p.m) return p.hessian(x, i);
        i -= p.m;
      }
      throw ConfigError("stack_constraints: constraint index out of range");
    };
  }
  if (products) {
    out.hessian_product = [parts, n](const Vector& x, const Vector& w, const Vector& v) -> Vector {
      Vector r = Vector::Zero(n);
      Index row = 0;
      for (const auto& p : parts) {
        r += p.hessian_product(x, w.segment(row, p.m), v);
        row += p.m;
      }
      return r;
    };
  }
  return out;
}

ProblemSpec make_problem(std::string name, const Objective& f, const ConstraintBlock& c) {
  ProblemSpec p;
  p.name = std::move(name);
  p.n = c.n;
  p.m = c.m;
  p.f_low = f.f_low;
  p.objective = f.value;
  p.objective_gradient = f.gradient;
  p.constraints = c.value;
  p.constraint_jacobian = c.jacobian;
  if (f.hessian && c.hessian) {
    p.objective_hessian = f.hessian;
    p.constraint_hessian = c.hessian;
  }
  if ((f.hessian_product || f.hessian) && c.hessian_product) {
    auto fh = f.hessian_product;
    auto fd = f.hessian;
    auto ch = c.hessian_product;
    p.hessian_product = [fh, fd, ch](const Vector& x, const Vector& w, const Vector& v) -> Vector {
      Vector out = fh ? fh(x, v) : Vector(fd(x) * v);
      out += ch(x, w, v);
      return out;
    };
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// objectives

Objective rosenbrock_objective(Index n) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("Rosenbrock objective: n must be even and positive");
  Objective f;
  f.f_low = 0.0;
  f.value = [n](const Vector& x) {
    double s = 0.0;
    for (Index i = 0; i < n; i += 2) {
      const double a = x[i];
      const double b = x[i + 1];
      const double r = b - a * a;
      s += 100.0 * r * r + (1.0 - a) * (1.0 - a);
    }
    return s;
  };
  f.gradient = [n](const Vector& x) {
    Vector g(n);
    for (Index i = 0; i < n; i += 2) {
      const double a = x[i];
      const double b = x[i + 1];
      const double r = b - a * a;
      g[i] = -400.0 * a * r - 2.0 * (1.0 - a);
      g[i + 1] = 200.0 * r;
    }
    return g;
  };
  f.hessian = [n](const Vector& x) {
    Matrix h = Matrix::Zero(n, n);
    for (Index i = 0; i < n; i += 2) {
      const double a = x[i];
      const double b = x[i + 1];
      h(i, i) = 1200.0 * a * a - 400.0 * b + 2.0;
      h(i, i + 1) = -400.0 * a;
      h(i + 1, i) = -400.0 * a;
      h(i + 1, i + 1) = 200.0;
    }
    return h;
  };
  f.hessian_product = [n](const Vector& x, const Vector& v) {
    Vector out(n);
    for (Index i = 0; i < n; i += 2) {
      const double a = x[i];
      const double b = x[i + 1];
      const double haa = 1200.0 * a * a - 400.0 * b + 2.0;
      const double hab = -400.0 * a;
      out[i] = haa * v[i] + hab * v[i + 1];
      out[i + 1] = hab * v[i] + 200.0 * v[i + 1];
    }
    return out;
  };
  return f;
}

Objective diagonal_quadratic_objective(Vector a, Vector d) {
  if (a.size() != d.size() || a.size() == 0) {
    throw ConfigError("diagonal quadratic: center and weights must have the same positive length");
  }
  if (!(d.minCoeff() > 0.0)) throw ConfigError("diagonal quadratic: weights must be positive");
  auto center = std::make_shared<const Vector>(std::move(a));
  auto weights = std::make_shared<const Vector>(std::move(d));
  Objective f;
  f.f_low = 0.0;
  f.value = [center, weights](const Vector& x) {
    return 0.5 * (weights->array() * (x - *center).array().square()).sum();
  };
  f.gradient = [center, weights](const Vector& x) -> Vector {
    return weights->cwiseProduct(x - *center);
  };
  f.hessian = [weights](const Vector&) -> Matrix { return weights->asDiagonal(); };
  f.hessian_product = [weights](const Vector&, const Vector& v) -> Vector {
    return weights->cwiseProduct(v);
  };
  return f;
}

Objective trace_objective(const Matrix& c, Index p) {
  if (c.rows() != c.cols()) throw ConfigError("trace objective: C must be square");
  const Index n = c.rows();
  auto mat = std::make_shared<const Matrix>(0.5 * (c + c.transpose()));
  Objective f;
  f.f_low = 0.0;
  f.value = [mat, n, p](const Vector& x) {
    double s = 0.0;
    for (Index j = 0; j < p; ++j) {
      const auto col = x.segment(j * n, n);
      s += col.dot((*mat) * col);
    }
    return s;
  };
  f.gradient = [mat, n, p](const Vector& x) -> Vector {
    Vector g(n * p);
    for (Index j = 0; j < p; ++j) g.segment(j * n, n) = 2.0 * ((*mat) * x.segment(j * n, n));
    return g;
  };
  f.hessian = [mat, n, p](const Vector&) -> Matrix {
    Matrix h = Matrix::Zero(n * p, n * p);
    for (Index j = 0; j < p; ++j) h.block(j * n, j * n, n, n) = 2.0 * (*mat);
    return h;
  };
  f.hessian_product = [mat, n, p](const Vector&, const Vector& v) -> Vector {
    Vector out(n * p);
    for (Index j = 0; j < p; ++j) out.segment(j * n, n) = 2.0 * ((*mat) * v.segment(j * n, n));
    return out;
  };
  return f;
}

// ---------------------------------------------------------------------------
// problem constructors

ProblemWithRegion make_rosenbrock_sphere(Index n) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("rosenbrock-sphere: n must be even and positive");
  const ConstraintBlock c = sphere_constraint(n);
  return {make_problem("rosenbrock-sphere", rosenbrock_objective(n), c), c.pl};
}

Vector make_x0_sphere(Index n, double eps0) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("make_x0_sphere: n must be even and positive");
  if (!(eps0 > 0.0)) throw ConfigError("make_x0_sphere: eps0 must be positive");
  return Vector::Constant(n, std::sqrt((1.0 + eps0 / kSqrt2) / static_cast<double>(n)));
}

ProblemWithRegion make_affine(const Matrix& a, const Vector& b, const Objective& f) {
  const ConstraintBlock c = affine_constraint(a, b);
  return {make_problem("affine", f, c), c.pl};
}

ProblemWithRegion make_binary(Index n, const Objective& f, double R) {
  const ConstraintBlock c = binary_constraint(n, R);
  return {make_problem("binary", f, c), c.pl};
}

ProblemWithRegion make_stiefel(Index n, Index p, const Objective& f, double R) {
  const ConstraintBlock c = stiefel_constraint(n, p, R);
  return {make_problem("stiefel", f, c), c.pl};
}

// ---------------------------------------------------------------------------
// sampling

Sampler box_sampler(Index n, double lo, double hi) {
  return [n, lo, hi](Rng& rng) { return uniform_vector(n, lo, hi, rng); };
}

Sampler near_feasible_sampler(std::function<Vector(Rng&)> feasible, double min_scale,
                              double max_scale) {
  return [feasible = std::move(feasible), min_scale, max_scale](Rng& rng) {
    Vector x = feasible(rng);
    std::uniform_real_distribution<double> u(std::log(min_scale), std::log(max_scale));
    const double s = std::exp(u(rng));
    return Vector(x + s * gaussian_vector(x.size(), rng));
  };
}

Sampler sphere_tube_sampler(Index n, double R) {
  return [n, R](Rng& rng) {
    Vector u = gaussian_vector(n, rng);
    u /= u.norm();
    std::uniform_real_distribution<double> t(-R, R);
    return Vector(std::sqrt(1.0 + t(rng)) * u);
  };
}

PLEstimate estimate_pl(const ProblemSpec& problem, double R, long n_samples, const Sampler& sampler,
                       std::uint64_t seed) {
  if (!(R > 0.0)) throw ConfigError("estimate_pl: R must be positive");
  if (n_samples <= 0) throw ConfigError("estimate_pl: sample count must be positive");
  Rng rng(seed);
  PLEstimate est;
  est.sigma_hat = std::numeric_limits<double>::infinity();
  for (long s = 0; s < n_samples; ++s) {
    const Vector x = sampler(rng);
    ++est.drawn;
    const Vector c = problem.constraints(x);
    const double cn = c.norm();
    if (!(cn > 0.0 && cn <= R)) continue;
    ++est.accepted;
    const double ratio = (problem.constraint_jacobian(x).transpose() * c).norm() / cn;
    if (ratio < est.sigma_hat) {
      est.sigma_hat = ratio;
      est.worst_point = x;
    }
  }
  if (est.accepted == 0) {
    std::ostringstream os;
    os << "estimate_pl: none of " << n_samples << " samples landed in {0 < ||c(x)|| <= " << R
       << "}; widen the sampling box or use a near-feasible sampler";
    throw SamplingError(os.str());
  }
  return est;
}

// ---------------------------------------------------------------------------
// registry

const std::vector<std::string>& registered_problems() {
  static const std::vector<std::string> names = {"rosenbrock-sphere", "affine-quadratic",
                                                 "binary-quadratic", "stiefel-trace",
                                                 "stacked-demo"};
  return names;
}

TestProblem make_registered(const std::string& name, const ProblemSize& size, double eps0,
                            std::uint64_t seed) {
  Rng rng(seed);
  const Index n = size.n;
  TestProblem tp;

  if (name == "rosenbrock-sphere") {
    auto [prob, pl] = make_rosenbrock_sphere(n);
    tp.problem = std::move(prob);
    tp.pl = pl;
    tp.x0 = make_x0_sphere(n, eps0);
    tp.pl_sampler = [n](double R) { return sphere_tube_sampler(n, R); };
    tp.analytic_sigma = [](double R) { return 2.0 * std::sqrt(1.0 - R); };
    return tp;
  }

  if (name == "affine-quadratic") {
    if (n <= 0) throw ConfigError("affine-quadratic: n must be positive");
    const Index m = size.m > 0 ? size.m : std::max<Index>(1, n / 2);
    if (m > n) throw ConfigError("affine-quadratic: m must not exceed n");
    // Orthonormal rows keep σ_min(A) = 1, so GD cost per outer step grows like β alone.
    const Matrix a = orthonormal_rows(m, n, rng);
    const Vector z = uniform_vector(n, -0.5, 0.5, rng);
    const Vector center = z + uniform_vector(n, -0.25, 0.25, rng);
    const Vector weights = uniform_vector(n, 1.0, 2.0, rng);
    auto [prob, pl] = make_affine(a, a * z, diagonal_quadratic_objective(center, weights));
    prob.name = name;
    tp.problem = std::move(prob);
    tp.pl = pl;
    tp.x0 = z;
    const double sigma = pl.sigma_min;
    tp.pl_sampler = [z](double) {
      return near_feasible_sampler([z](Rng&) { return z; }, 1e-4, 1.0);
    };
    tp.analytic_sigma = [sigma](double) { return sigma; };
    return tp;
  }

  if (name == "binary-quadratic") {
    if (n <= 0) throw ConfigError("binary-quadratic: n must be positive");
    const Vector center = uniform_vector(n, -0.25, 1.25, rng);
    auto [prob, pl] = make_binary(n, diagonal_quadratic_objective(center, Vector::Ones(n)));
    prob.name = name;
    tp.problem = std::move(prob);
    tp.pl = pl;
    tp.x0 = center.unaryExpr([](double v) { return v < 0.5 ? 0.0 : 1.0; });
    tp.pl_sampler = [n](double) {
      return near_feasible_sampler(
          [n](Rng& r) {
            std::bernoulli_distribution coin(0.5);
            Vector v(n);
            for (Index i = 0; i < n; ++i) v[i] = coin(r) ? 1.0 : 0.0;
            return v;
          },
          1e-4, 0.3);
    };
    tp.analytic_sigma = [](double R) { return std::sqrt(1.0 - 4.0 * R); };
    return tp;
  }

  if (name == "stiefel-trace") {
    const Index p = size.p;
    if (n <= 0 || p <= 0) throw ConfigError("stiefel-trace: n and p must be positive");
    if (p > n) throw ConfigError("stiefel-trace: p must not exceed n");
    const Matrix g = gaussian_matrix(n, n, rng);
    const Matrix c = g.transpose() * g / static_cast<double>(n) + 0.5 * Matrix::Identity(n, n);
    auto [prob, pl] = make_stiefel(n, p, trace_objective(c, p));
    prob.name = name;
    tp.problem = std::move(prob);
    tp.pl = pl;
    tp.x0 = random_orthonormal(n, p, rng);
    tp.pl_sampler = [n, p](double) {
      return near_feasible_sampler([n, p](Rng& r) { return random_orthonormal(n, p, r); }, 1e-4,
                                   0.3);
    };
    tp.analytic_sigma = [](double R) { return 2.0 * std::sqrt(1.0 - R); };
    return tp;
  }

  if (name == "stacked-demo") {
    if (n < 4 || n % 4 != 0) throw ConfigError("stacked-demo: n must be a positive multiple of 4");
    const Index half = n / 2;
    const Index m2 = std::max<Index>(1, half / 2);
    const Matrix a2 = orthonormal_rows(m2, half, rng);
    const Vector z = uniform_vector(half, -0.5, 0.5, rng);
    const ConstraintBlock sphere = embed_constraint(sphere_constraint(half), 0, n);
    const ConstraintBlock affine = embed_constraint(affine_constraint(a2, a2 * z), half, n);
    const ConstraintBlock c = stack_constraints({sphere, affine});
    tp.problem = make_problem(name, rosenbrock_objective(n), c);
    tp.pl = c.pl;
    tp.x0.resize(n);
    tp.x0 << make_x0_sphere(half, eps0), z;
    const double sigma_affine = affine.pl.sigma_min;
    tp.pl_sampler = [half, z](double R) {
      Sampler tube = sphere_tube_sampler(half, R);
      Sampler plane = near_feasible_sampler([z](Rng&) { return z; }, 1e-4, R);
      return Sampler([tube, plane, half](Rng& r) {
        Vector x(2 * half);
        x << tube(r), plane(r);
        return x;
      });
    };
    tp.analytic_sigma = [sigma_affine](double R) {
      return std::min(2.0 * std::sqrt(1.0 - R), sigma_affine);
    };
    return tp;
  }

  std::ostringstream os;
  os << "unknown problem '" << name << "'; expected one of:";
  for (const auto& n_ : registered_problems()) os << ' ' << n_;
  throw ConfigError(os.str());
}

}  // namespace qpm
