#include "qpm/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace qpm {

namespace {

using nlohmann::json;

// JSON has no infinity; emit null so readers see "absent" rather than a bogus number.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
json optional_number(const std::optional<T>& v) {
  return v ? number(*v) : json(nullptr);
}

json counts_json(const OracleCounts& c) {
  return {{"value_evals", c.value_evals},
          {"grad_evals", c.gradient_evals},
          {"hess_evals", c.hessian_evals}};
}

json config_json(const RunReport& r) {
  const QpmConfig& c = r.config;
  json j = {{"problem", r.problem},
            {"n", r.n},
            {"m", r.m},
            {"eps0", c.rule.eps0},
            {"eps1", c.rule.eps1},
            {"tau_cap", std::isinf(c.rule.tau_cap) ? json("inf") : json(c.rule.tau_cap)},
            {"alpha", c.alpha},
            {"beta0", c.beta0},
            {"inner", std::string(to_string(c.inner_kind))},
            {"max_outer_iters", r.max_outer_iters},
            {"enforce_x0_feasibility", c.enforce_x0_feasibility},
            {"seed", c.seed}};
  if (c.inner_kind == InnerKind::gd) {
    j["gd"] = {{"armijo_slope", c.gd.armijo_slope},
               {"backtrack_factor", c.gd.backtrack_factor},
               {"initial_step", c.gd.initial_step},
               {"step_recovery", c.gd.step_recovery},
               {"max_inner_iters", c.gd.max_inner_iters},
               {"noise_band", c.gd.noise_band}};
  } else {
    j["tr"] = {{"delta0", c.tr.delta0},
               {"delta_max", c.tr.delta_max},
               {"eta_accept", c.tr.eta_accept},
               {"eta_expand", c.tr.eta_expand},
               {"shrink", c.tr.shrink},
               {"expand", c.tr.expand},
               {"cg_rel_tol", c.tr.cg_rel_tol},
               {"max_inner_iters", c.tr.max_inner_iters},
               {"noise_band", c.tr.noise_band}};
  }
  return j;
}

json bounds_json(const BoundReport& b) {
  return {{"beta_final", b.beta_final},
          {"outer_iters_observed", b.outer_iters_observed},
          {"T_hat", number(b.T_hat)},
          {"T_tilde", optional_number(b.T_tilde)},
          {"beta_max_noPL", number(b.beta_max_noPL)},
          {"beta_max_PL", optional_number(b.beta_max_PL)},
          {"inputs",
           {{"f0", b.inputs.f0},
            {"f_low", b.inputs.f_low},
            {"sigma_min", optional_number(b.inputs.sigma_min)},
            {"R", optional_number(b.inputs.R)},
            {"L_f0", optional_number(b.inputs.L_f0)},
            {"L_f0_estimated", b.inputs.L_f0_estimated}}}};
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& os, const RunReport& report) {
  os << kTraceHeader << '\n';
  for (const auto& r : report.trace) {
    os << r.k << ',' << format_double(r.beta) << ',' << r.inner_iters << ','
       << format_double(r.c_norm) << ',' << format_double(r.grad_q_norm) << ','
       << format_double(r.f) << ',' << format_double(r.q) << ',' << r.evals.value_evals << ','
       << r.evals.gradient_evals << ',' << r.evals.hessian_evals << '\n';
  }
}

std::string summary_json(const QpmResult& result) {
  const RunReport& r = result.report;
  long inner_total = 0;
  for (const auto& rec : r.trace) inner_total += rec.inner_iters;

  json j;
  j["config"] = config_json(r);
  j["status"] = std::string(to_string(result.status));
  j["message"] = result.message;
  j["outer_iters"] = r.trace.size();
  j["inner_iters_total"] = inner_total;
  j["totals"] = counts_json(r.counters.total);
  j["x0"] = {{"f", r.f0}, {"c_norm", r.c0_norm}};
  if (result.certificate) {
    const KKTCertificate& c = *result.certificate;
    j["certificate"] = {{"valid", c.valid()},
                        {"feas_residual", c.feas_residual},
                        {"stat_residual", c.stat_residual},
                        {"lambda_norm", c.lambda.norm()}};
  } else {
    j["certificate"] = nullptr;
  }
  if (!r.trace.empty()) {
    const OuterRecord& last = r.trace.back();
    j["final"] = {{"f", last.f}, {"c_norm", last.c_norm}, {"gradQ_norm", last.grad_q_norm},
                  {"beta", last.beta}};
  }
  j["bounds"] = r.bounds ? bounds_json(*r.bounds) : json(nullptr);
  j["invariant_violations"] = monitor_invariants(r);
  j["data_errors"] = r.data_errors;
  j["elapsed_seconds"] = r.elapsed_seconds;
  return j.dump(2) + "\n";
}

std::string gnuplot_script(const std::string& csv_path, const std::string& title) {
  std::ostringstream os;
  os << "# usage: gnuplot -p plot.gp\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set logscale y\n"
     << "set format y '%.0e'\n"
     << "set xlabel 'outer iteration k'\n"
     << "set title '" << title << "'\n"
     << "plot '" << csv_path << "' using 1:4 with linespoints title '||c(x)||', \\\n"
     << "     '' using 1:5 with linespoints title '||grad Q||', \\\n"
     << "     '' using 1:2 with linespoints title 'beta'\n";
  return os.str();
}

}  // namespace qpm
