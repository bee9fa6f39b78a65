#pragma once

// Name-based construction of solvers from JSON parameters, shared by the CLI and
// the bench.
//
//   mne, wmne, loreta, sloreta   alpha (number) | alpha_rule, lcurve_grid, weight_mode (sloreta)
//   focuss                       max_iter, tol, init ("uniform" | "mne")
//   mxne, irmxne                 alpha (absolute) | alpha_fraction of alpha_max (default 0.2),
//                                max_iter, tol, reweight_rounds (irmxne, default 3)
//   sbl_wipf, sbl_zhang          max_iter, tol, lambda (wipf), prune (zhang)
//   trap_music, rap_music        drop_factor, n_tilde
//   vbsccd, sissy                lambda | lambda_fraction of |K^T Y|_inf (default 0.05),
//                                alpha (sissy, default 0.1), rho, max_iter, tol

#include "sparseloc/carss.hpp"

#include <string>

namespace sparseloc {

const std::vector<std::string>& solver_names();

/// Throws ConfigError for unknown names or parameters. `baseline_samples` is forwarded
/// to solvers that estimate noise from a pre-stimulus segment.
SolverFn make_solver(const std::string& name, const nlohmann::json& params = nlohmann::json::object(),
                     int baseline_samples = 0);

} // namespace sparseloc
