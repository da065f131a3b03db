#pragma once

#include <ostream>
#include <string>

#include "qpm/outer.hpp"

namespace qpm {

inline constexpr const char* kTraceHeader =
    "k,beta,inner_iters,c_norm,gradQ_norm,f,Q,value_evals,grad_evals,hess_evals";

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double v);

/// One row per outer iteration under kTraceHeader.
void write_trace_csv(std::ostream& os, const RunReport& report);

/// Config, status, certificate residuals, oracle totals, bounds and timing.
std::string summary_json(const QpmResult& result);

/// gnuplot script plotting ‖c‖, ‖∇Q‖ and β against k from a trace CSV.
std::string gnuplot_script(const std::string& csv_path, const std::string& title);

}  // namespace qpm
