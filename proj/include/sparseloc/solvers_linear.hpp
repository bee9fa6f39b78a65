#pragma once

#include "sparseloc/model.hpp"

#include <optional>
#include <utility>

namespace sparseloc {

enum class WeightMode { identity, depth, laplacian };
enum class AlphaRule { fixed, svd_heuristic, l_curve };

WeightMode weight_mode_from_string(const std::string& s);
AlphaRule alpha_rule_from_string(const std::string& s);

struct LinearSolverOptions {
    WeightMode weight_mode = WeightMode::identity;
    AlphaRule alpha_rule = AlphaRule::svd_heuristic;
    double alpha = 0.0;              ///< used when alpha_rule == fixed
    std::vector<double> lcurve_grid; ///< empty: 15 log-spaced values scaled to the gram spectrum
};

/// W^-1 K^T for the chosen weight mode ((dof*M) x N). The Laplacian prior is
/// W = Omega L^T L Omega + 1e-10 * max(diag) * I with Omega = diag(|K_i|) and L the
/// graph Laplacian of the level-1 source adjacency applied per dof component.
Matrix prior_times_gain_t(const LeadField& lf, WeightMode mode);

/// 0.01 * s1^2 of the gain matrix.
double alpha_svd_heuristic(const LeadField& lf);

/// Index of the maximum signed three-point curvature of an L-curve given as
/// (log residual, log solution norm) points ordered by increasing alpha. Only
/// interior points are scored; ties go to the smaller alpha.
std::size_t lcurve_corner(const std::vector<std::pair<double, double>>& points);

/// L-curve corner over `grid` (>= 5 positive values, sorted ascending).
double alpha_lcurve(const LeadField& lf, const Matrix& y, const std::vector<double>& grid,
                    WeightMode mode = WeightMode::identity);

/// Resolves opts.alpha_rule to a number for (lf, y).
double resolve_alpha(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts);

/// X = W^-1 K^T (K W^-1 K^T + alpha I)^+ Y.
SourceEstimate mne_solve(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts);

/// Centered inverse T = W^-1 K^T H (H K W^-1 K^T H + alpha H)^+ with H = I - 11^T/N,
/// standardized per source by the diagonal blocks of T K W^-1. The output
/// amplitude of source j is S_jj^{-1/2} x_j, whose squared norm is the
/// standardized power.
SourceEstimate sloreta_solve(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts);

} // namespace sparseloc
