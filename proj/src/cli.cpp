#include "qpm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qpm/report.hpp"

namespace qpm {

namespace fs = std::filesystem;
using nlohmann::json;

double parse_tau_cap(const std::string& text) {
  if (text == "inf" || text == "+inf" || text == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || !(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError("--tau-cap: expected 0, inf, or a positive number, got '" + text + "'");
  }
  return v;
}

QpmConfig make_config(const RunRequest& req) {
  QpmConfig cfg;
  cfg.beta0 = req.beta0;
  cfg.alpha = req.alpha;
  cfg.rule = {req.eps0, req.eps1.value_or(req.eps0), req.tau_cap};
  cfg.inner_kind = req.inner;
  cfg.gd = req.gd;
  cfg.tr = req.tr;
  cfg.max_outer_iters = req.max_outer_iters;
  cfg.enforce_x0_feasibility = req.enforce_x0_feasibility;
  cfg.seed = req.seed;
  cfg.validate();
  return cfg;
}

std::optional<LineFit> fit_loglog_inverse(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("fit: x and y differ in length");
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 2) return std::nullopt;
  const std::size_t n = x.size();
  Vector u(static_cast<Index>(n));
  Vector v(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("fit: values must be positive");
    u[static_cast<Index>(i)] = -std::log(x[i]);
    v[static_cast<Index>(i)] = std::log(y[i]);
  }
  const double um = u.mean();
  const double vm = v.mean();
  const Vector du = u.array() - um;
  const Vector dv = v.array() - vm;
  LineFit fit;
  fit.slope = du.dot(dv) / du.squaredNorm();
  fit.intercept = vm - fit.slope * um;
  fit.residual = std::sqrt((dv - fit.slope * du).squaredNorm() / static_cast<double>(n));
  return fit;
}

namespace {

struct Artifacts {
  fs::path trace;
  fs::path summary;
  fs::path plot;
};

Artifacts write_artifacts(const fs::path& dir, const std::string& suffix, const QpmResult& r) {
  fs::create_directories(dir);
  Artifacts a{dir / ("trace" + suffix + ".csv"), dir / ("summary" + suffix + ".json"),
              dir / ("plot" + suffix + ".gp")};
  {
    std::ofstream os(a.trace);
    write_trace_csv(os, r.report);
  }
  {
    std::ofstream os(a.summary);
    os << summary_json(r);
  }
  {
    std::ofstream os(a.plot);
    os << gnuplot_script(a.trace.filename().string(), r.report.problem);
  }
  return a;
}

long inner_total(const RunReport& r) {
  long s = 0;
  for (const auto& rec : r.trace) s += rec.inner_iters;
  return s;
}

std::string verdict(const QpmResult& r) {
  std::ostringstream os;
  os << std::setprecision(4);
  const OracleCounts& t = r.report.counters.total;
  if (r.ok()) {
    const KKTCertificate& c = *r.certificate;
    os << "certified: ||c|| = " << c.feas_residual << " <= " << c.eps0
       << ", stationarity = " << c.stat_residual << " <= " << c.eps1;
  } else {
    os << "FAILED (" << to_string(r.status) << "): " << r.message;
  }
  os << "; T = " << r.report.trace.size() << ", inner = " << inner_total(r.report)
     << ", value/grad/hess = " << t.value_evals << '/' << t.gradient_evals << '/'
     << t.hessian_evals;
  if (!r.report.trace.empty()) {
    os << ", f = " << std::setprecision(8) << r.report.trace.back().f
       << ", beta = " << r.report.trace.back().beta;
  }
  return os.str();
}

/// Solve one request on a registered problem. PL data of the problem feed the bound report.
QpmResult solve_request(const RunRequest& req) {
  QpmConfig cfg = make_config(req);
  TestProblem tp = make_registered(req.problem, req.size, req.eps0, req.seed);
  if (tp.pl.R > cfg.rule.eps0) cfg.pl = tp.pl;
  return qpm_solve(tp.problem, tp.x0, cfg);
}

int cmd_solve(const RunRequest& req, std::ostream& out) {
  const QpmResult r = solve_request(req);
  const Artifacts a = write_artifacts(req.out_dir, "", r);
  out << verdict(r) << '\n';
  out << "wrote " << a.trace.string() << ", " << a.summary.string() << ", " << a.plot.string() << '\n';
  for (const auto& v : monitor_invariants(r.report)) out << "invariant violation: " << v << '\n';
  return r.ok() ? kExitOk : kExitSolverFailure;
}

int cmd_compare(const RunRequest& req, std::ostream& out) {
  struct Arm {
    const char* name;
    double cap;
  };
  const Arm arms[] = {{"fixed", 0.0}, {"adaptive", std::numeric_limits<double>::infinity()}};
  std::vector<QpmResult> results;
  bool all_ok = true;
  for (const Arm& arm : arms) {
    RunRequest r = req;
    r.tau_cap = arm.cap;
    results.push_back(solve_request(r));
    write_artifacts(req.out_dir, std::string("_") + arm.name, results.back());
    all_ok = all_ok && results.back().ok();
    if (!results.back().ok()) break;
  }

  std::ofstream csv(fs::path(req.out_dir) / "compare.csv");
  csv << "rule,status,outer_iters,inner_iters,value_evals,grad_evals,hess_evals,c_norm,stat_residual,f\n";
  out << std::left << std::setw(10) << "rule" << std::setw(8) << "outer" << std::setw(10) << "inner"
      << std::setw(10) << "value" << std::setw(10) << "grad" << std::setw(8) << "hess"
      << std::setw(14) << "||c||" << std::setw(14) << "stationarity" << "f\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const QpmResult& r = results[i];
    const OracleCounts& t = r.report.counters.total;
    const double cn = r.report.trace.empty() ? r.report.c0_norm : r.report.trace.back().c_norm;
    const double f = r.report.trace.empty() ? r.report.f0 : r.report.trace.back().f;
    const double st = r.certificate ? r.certificate->stat_residual
                                    : (r.report.trace.empty() ? 0.0 : r.report.trace.back().grad_q_norm);
    out << std::setw(10) << arms[i].name << std::setw(8) << r.report.trace.size() << std::setw(10)
        << inner_total(r.report) << std::setw(10) << t.value_evals << std::setw(10)
        << t.gradient_evals << std::setw(8) << t.hessian_evals << std::setw(14)
        << std::setprecision(4) << cn << std::setw(14) << st << std::setprecision(8) << f << '\n';
    csv << arms[i].name << ',' << to_string(r.status) << ',' << r.report.trace.size() << ','
        << inner_total(r.report) << ',' << t.value_evals << ',' << t.gradient_evals << ','
        << t.hessian_evals << ',' << format_double(cn) << ',' << format_double(st) << ','
        << format_double(f) << '\n';
  }
  if (results.size() == 2) {
    const OracleCounts& a = results[1].report.counters.total;
    const OracleCounts& b = results[0].report.counters.total;
    auto ratio = [](double num, double den) { return den > 0 ? num / den : std::nan(""); };
    out << std::setprecision(4) << "adaptive/fixed: inner = "
        << ratio(inner_total(results[1].report), inner_total(results[0].report))
        << ", value = " << ratio(a.value_evals, b.value_evals)
        << ", grad = " << ratio(a.gradient_evals, b.gradient_evals)
        << ", hess = " << ratio(a.hessian_evals, b.hessian_evals) << '\n';
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) out << arms[i].name << ": " << verdict(results[i]) << '\n';
  }
  return all_ok ? kExitOk : kExitSolverFailure;
}

int cmd_sweep(const RunRequest& req, const std::vector<double>& grid, const std::string& param,
              std::ostream& out, std::ostream& err) {
  if (grid.empty()) throw ConfigError("--grid needs at least one value");
  if (param != "eps0" && param != "eps1") throw ConfigError("--param must be eps0 or eps1");
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  if (grid.size() < 3 || *hi / *lo < 100.0) {
    err << "warning: a scaling fit wants at least 3 grid values spanning 2 decades\n";
  }

  fs::create_directories(req.out_dir);
  std::ofstream csv(fs::path(req.out_dir) / "sweep.csv");
  csv << "param,value,status,outer_iters,inner_iters,value_evals,grad_evals,hess_evals,beta_final,"
         "c_norm,stat_residual,T_hat_ceil,invariants_ok\n";

  json cells = json::array();
  std::vector<double> xs;
  std::vector<double> betas;
  std::vector<double> grads;
  std::vector<double> inners;
  bool ok = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RunRequest r = req;
    if (param == "eps0") {
      r.eps0 = grid[i];
    } else {
      r.eps1 = grid[i];
    }
    const QpmResult res = solve_request(r);
    write_artifacts(req.out_dir, "_cell" + std::to_string(i), res);
    const RunReport& rep = res.report;
    const OracleCounts& t = rep.counters.total;
    const double beta = rep.trace.empty() ? r.beta0 : rep.trace.back().beta;
    const double cn = rep.trace.empty() ? rep.c0_norm : rep.trace.back().c_norm;
    const double st = res.certificate ? res.certificate->stat_residual : std::nan("");
    const double t_hat = rep.bounds ? std::ceil(rep.bounds->T_hat) : std::nan("");
    const bool inv_ok = monitor_invariants(rep).empty();
    csv << param << ',' << format_double(grid[i]) << ',' << to_string(res.status) << ','
        << rep.trace.size() << ',' << inner_total(rep) << ',' << t.value_evals << ','
        << t.gradient_evals << ',' << t.hessian_evals << ',' << format_double(beta) << ','
        << format_double(cn) << ',' << format_double(st) << ',' << format_double(t_hat) << ','
        << (inv_ok ? 1 : 0) << '\n';
    cells.push_back({{"value", grid[i]},
                     {"status", std::string(to_string(res.status))},
                     {"outer_iters", rep.trace.size()},
                     {"inner_iters", inner_total(rep)},
                     {"value_evals", t.value_evals},
                     {"grad_evals", t.gradient_evals},
                     {"hess_evals", t.hessian_evals},
                     {"beta_final", beta},
                     {"invariants_ok", inv_ok}});
    out << param << " = " << grid[i] << ": " << verdict(res) << '\n';
    if (!res.ok()) {
      ok = false;
      err << "sweep aborted at " << param << " = " << grid[i] << "\n";
      break;
    }
    xs.push_back(grid[i]);
    betas.push_back(beta);
    grads.push_back(static_cast<double>(std::max<std::int64_t>(1, t.gradient_evals)));
    inners.push_back(static_cast<double>(std::max<long>(1, inner_total(rep))));
  }

  auto fit_json = [](const std::optional<LineFit>& f) -> json {
    if (!f) return nullptr;
    return {{"slope", f->slope}, {"intercept", f->intercept}, {"residual", f->residual}};
  };
  const auto beta_fit = fit_loglog_inverse(xs, betas);
  json summary = {{"param", param},
                  {"grid", grid},
                  {"cells", cells},
                  {"slopes",
                   {{"beta_final", fit_json(beta_fit)},
                    {"grad_evals", fit_json(fit_loglog_inverse(xs, grads))},
                    {"inner_iters", fit_json(fit_loglog_inverse(xs, inners))}}}};
  std::ofstream(fs::path(req.out_dir) / "sweep.json") << summary.dump(2) << '\n';

  if (beta_fit) {
    out << "slope of log beta_final vs log(1/" << param << ") = " << std::setprecision(4)
        << beta_fit->slope << " (rms residual " << beta_fit->residual << ")\n";
  } else {
    err << "warning: slope undefined with fewer than two distinct grid values; reported as absent\n";
    out << "slope: absent\n";
  }
  return ok ? kExitOk : kExitSolverFailure;
}

int cmd_check_pl(const RunRequest& req, std::optional<double> radius, long samples,
                 std::ostream& out) {
  const TestProblem tp = make_registered(req.problem, req.size, req.eps0, req.seed);
  const double R = radius.value_or(tp.pl.R);
  if (!(R > 0.0)) throw ConfigError("--R must be positive");
  const PLEstimate est = estimate_pl(tp.problem, R, samples, tp.pl_sampler(R), req.seed);
  out << std::setprecision(10) << "sigma_hat = " << est.sigma_hat << " over " << est.accepted
      << " of " << est.drawn << " samples in {0 < ||c|| <= " << R << "}\n";
  const Vector c = tp.problem.constraints(est.worst_point);
  out << "worst sample: ||x|| = " << est.worst_point.norm() << ", ||c(x)|| = " << c.norm();
  const Index shown = std::min<Index>(6, est.worst_point.size());
  out << ", x[0:" << shown << "] =";
  for (Index i = 0; i < shown; ++i) out << ' ' << est.worst_point[i];
  out << '\n';

  double analytic = std::nan("");
  if (tp.analytic_sigma) analytic = tp.analytic_sigma(R);
  if (!(analytic > 0.0)) {
    out << "no analytic sigma_min for R = " << R << '\n';
    return kExitOk;
  }
  const bool pass = est.sigma_hat >= analytic - 1e-6;
  out << (pass ? "PASS" : "FAIL") << ": sigma_hat " << (pass ? ">=" : "<")
      << " analytic sigma_min - 1e-6 = " << analytic << " - 1e-6\n";
  return pass ? kExitOk : kExitSolverFailure;
}

struct BoundArgs {
  std::optional<double> f0;
  std::optional<double> f_low;
  std::optional<double> sigma_min;
  std::optional<double> R;
  std::optional<double> L_f0;
};

int cmd_bounds(const RunRequest& req, const BoundArgs& args, std::ostream& out) {
  const QpmConfig cfg = make_config(req);
  BoundInputs in;
  if (args.f0) {
    if (!args.f_low) throw ConfigError("--f0 needs --f-low");
    in.f0 = *args.f0;
    in.f_low = *args.f_low;
  } else {
    const TestProblem tp = make_registered(req.problem, req.size, req.eps0, req.seed);
    in.f0 = tp.problem.objective(tp.x0);
    in.f_low = args.f_low.value_or(tp.problem.f_low);
  }
  in.sigma_min = args.sigma_min;
  in.R = args.R;
  in.L_f0 = args.L_f0;
  const BoundReport b = compute_bounds(in, cfg.rule, cfg);

  out << std::setprecision(10);
  out << "f(x0) - f_low = " << in.f0 - in.f_low << ", eps0 = " << cfg.rule.eps0
      << ", eps1 = " << cfg.rule.eps1 << ", alpha = " << cfg.alpha << ", beta0 = " << cfg.beta0
      << '\n';
  out << "T_hat            = " << b.T_hat << " (ceil " << std::ceil(b.T_hat) << ")\n";
  out << "beta_max (no PL) = " << b.beta_max_noPL << "  [order eps0^-2]\n";
  if (b.beta_max_PL) {
    out << "beta_max (PL)    = " << *b.beta_max_PL << "  [order eps0^-1]\n";
    out << "T_tilde          = " << *b.T_tilde << " (ceil " << std::ceil(*b.T_tilde) << ")\n";
  } else {
    out << "PL bounds: pass --sigma-min, --R and --Lf0\n";
  }

  json j = {{"T_hat", b.T_hat},
            {"beta_max_noPL", b.beta_max_noPL},
            {"T_tilde", b.T_tilde ? json(*b.T_tilde) : json(nullptr)},
            {"beta_max_PL", b.beta_max_PL ? json(*b.beta_max_PL) : json(nullptr)},
            {"f0", in.f0},
            {"f_low", in.f_low},
            {"eps0", cfg.rule.eps0},
            {"eps1", cfg.rule.eps1},
            {"alpha", cfg.alpha},
            {"beta0", cfg.beta0}};
  fs::create_directories(req.out_dir);
  std::ofstream(fs::path(req.out_dir) / "bounds.json") << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quadratic penalty method for equality-constrained problems", "qpm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value file; command-line flags take precedence");

  RunRequest req;
  std::string tau_cap = "inf";
  std::string inner = "gd";
  double eps1 = 0.0;
  long max_inner = 0;
  double noise_band = GdConfig{}.noise_band;
  bool no_x0_check = false;

  app.add_option("--problem", req.problem, "Built-in problem")
      ->check(CLI::IsMember(registered_problems()));
  app.add_option("--n", req.size.n, "Dimension (rows of X for stiefel-trace)");
  app.add_option("--m", req.size.m, "Rows of A for affine-quadratic (0: n/2)");
  app.add_option("--p", req.size.p, "Columns of X for stiefel-trace");
  app.add_option("--eps0", req.eps0, "Feasibility target");
  auto* eps1_opt = app.add_option("--eps1", eps1, "Stationarity target (default: eps0)");
  app.add_option("--alpha", req.alpha, "Penalty growth factor (> 1)");
  app.add_option("--beta0", req.beta0, "Initial penalty (>= 1)");
  app.add_option("--tau-cap", tau_cap, "Tolerance cap: 0 (fixed), inf (adaptive) or a positive real");
  app.add_option("--inner", inner, "Inner solver")->check(CLI::IsMember({"gd", "tr"}));
  app.add_option("--seed", req.seed, "Random seed");
  app.add_option("--out", req.out_dir, "Output directory");
  app.add_option("--max-outer", req.max_outer_iters, "Outer iteration cap (0: default)");
  app.add_option("--max-inner", max_inner, "Inner iteration cap (0: solver default)");
  app.add_option("--noise-band", noise_band, "Relative round-off band on Q (0 disables)");
  app.add_flag("--no-x0-check", no_x0_check, "Skip the ||c(x0)|| <= eps0/sqrt(2) check");
  app.add_option("--armijo-slope", req.gd.armijo_slope, "GD sufficient-decrease constant");
  app.add_option("--backtrack", req.gd.backtrack_factor, "GD backtracking factor");
  app.add_option("--initial-step", req.gd.initial_step, "GD first trial step");
  app.add_option("--step-recovery", req.gd.step_recovery, "GD step growth after acceptance");
  app.add_option("--delta0", req.tr.delta0, "TR initial radius");
  app.add_option("--delta-max", req.tr.delta_max, "TR radius cap");
  app.add_option("--eta-accept", req.tr.eta_accept, "TR acceptance ratio");
  app.add_option("--eta-expand", req.tr.eta_expand, "TR expansion ratio");
  app.add_option("--shrink", req.tr.shrink, "TR shrink factor");
  app.add_option("--expand", req.tr.expand, "TR expansion factor");
  app.add_option("--cg-rel-tol", req.tr.cg_rel_tol, "Truncated CG forcing cap");

  auto* solve = app.add_subcommand("solve", "Run one solve and write trace.csv, summary.json, plot.gp");
  auto* compare = app.add_subcommand("compare", "Run fixed (tau_cap 0) and adaptive (tau_cap inf) rules");
  auto* sweep = app.add_subcommand("sweep", "Solve over a tolerance grid and fit log-log slopes");
  auto* check_pl = app.add_subcommand("check-pl", "Estimate the PL constant by sampling");
  auto* bounds = app.add_subcommand("bounds", "Evaluate the outer-iteration and penalty bounds");

  std::vector<double> grid;
  std::string param = "eps0";
  sweep->add_option("--grid", grid, "Comma-separated grid values")->delimiter(',')->required();
  sweep->add_option("--param", param, "Swept tolerance")->check(CLI::IsMember({"eps0", "eps1"}));

  double pl_radius = 0.0;
  long samples = 100000;
  auto* r_opt = check_pl->add_option("--R", pl_radius, "Tube radius (default: problem's R)");
  check_pl->add_option("--samples", samples, "Number of samples");

  BoundArgs bargs;
  double b_f0 = 0, b_flow = 0, b_sigma = 0, b_R = 0, b_L = 0;
  auto* o_f0 = bounds->add_option("--f0", b_f0, "f(x0) (default: from the problem)");
  auto* o_flow = bounds->add_option("--f-low", b_flow, "Lower bound on f");
  auto* o_sigma = bounds->add_option("--sigma-min", b_sigma, "PL constant");
  auto* o_R = bounds->add_option("--R", b_R, "PL radius");
  auto* o_L = bounds->add_option("--Lf0", b_L, "Gradient bound on the sublevel set");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (eps1_opt->count() > 0) req.eps1 = eps1;
    req.tau_cap = parse_tau_cap(tau_cap);
    req.inner = inner == "tr" ? InnerKind::tr : InnerKind::gd;
    req.enforce_x0_feasibility = !no_x0_check;
    req.gd.noise_band = noise_band;
    req.tr.noise_band = noise_band;
    if (max_inner > 0) {
      req.gd.max_inner_iters = max_inner;
      req.tr.max_inner_iters = max_inner;
    } else if (max_inner < 0) {
      throw ConfigError("--max-inner must be non-negative");
    }

    if (*solve) return cmd_solve(req, out);
    if (*compare) return cmd_compare(req, out);
    if (*sweep) return cmd_sweep(req, grid, param, out, err);
    if (*check_pl) {
      if (samples <= 0) throw ConfigError("--samples must be positive");
      return cmd_check_pl(req, r_opt->count() ? std::optional<double>(pl_radius) : std::nullopt,
                          samples, out);
    }
    if (*bounds) {
      if (o_f0->count()) bargs.f0 = b_f0;
      if (o_flow->count()) bargs.f_low = b_flow;
      if (o_sigma->count()) bargs.sigma_min = b_sigma;
      if (o_R->count()) bargs.R = b_R;
      if (o_L->count()) bargs.L_f0 = b_L;
      return cmd_bounds(req, bargs, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const CapabilityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolverFailure;
  }
  return kExitBadConfig;
}

}  // namespace qpm
