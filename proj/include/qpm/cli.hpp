#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qpm/outer.hpp"

namespace qpm {

enum ExitCode : int { kExitOk = 0, kExitSolverFailure = 1, kExitBadConfig = 2 };

/// Everything a single solve needs, as parsed from flags and the config file.
struct RunRequest {
  std::string problem = "rosenbrock-sphere";
  ProblemSize size;
  double eps0 = 1e-3;
  /// Unset means "same as eps0".
  std::optional<double> eps1;
  double alpha = 1.2;
  double beta0 = 1.0;
  double tau_cap = std::numeric_limits<double>::infinity();
  InnerKind inner = InnerKind::gd;
  GdConfig gd;
  TrConfig tr;
  long max_outer_iters = 0;
  bool enforce_x0_feasibility = true;
  std::uint64_t seed = 0;
  std::string out_dir = "qpm_out";
};

/// "0", "inf" or a positive real. Throws ConfigError naming the accepted forms.
double parse_tau_cap(const std::string& text);

/// Solver configuration for a request; validated, throws ConfigError.
QpmConfig make_config(const RunRequest& req);

/// Least-squares line y = slope·x + intercept with the RMS residual.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

/// Fit of log y against log(1/x). Absent with fewer than two distinct x.
std::optional<LineFit> fit_loglog_inverse(const std::vector<double>& x, const std::vector<double>& y);

/// Entry point shared by the executable and the tests. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpm
