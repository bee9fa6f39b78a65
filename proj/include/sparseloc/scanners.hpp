#pragma once

#include "sparseloc/model.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <utility>

namespace sparseloc {

struct SubspaceModel {
    Matrix us;          ///< N x n_tilde, orthonormal columns; zero where the eigenvalue is numerically zero
    Vector eigenvalues; ///< all eigenvalues of Y Y^T, descending
    int n_est = 0;
    int n_tilde = 0;
    bool short_window = false; ///< T < N: covariance is rank limited by time
};

/// Eigenvalues at or above this fraction of the largest count as signal.
inline constexpr double kSignalEigenRatio = 0.01;

SubspaceModel estimate_signal_subspace(const Matrix& y, std::optional<int> n_tilde_hint = std::nullopt);

struct ScanOptions {
    double drop_factor = 0.5;
    /// false: RAP-MUSIC (no truncation of the signal subspace).
    bool truncate = true;
};

struct ScanResult {
    IndexList found;
    /// Max localizer value of every iteration evaluated, including the one that stopped the scan.
    std::vector<double> trace;
};

/// Localizer of every source for the current out-projector and signal basis.
/// `r_basis` has orthonormal columns spanning R_i; `q` is the out-projector.
Vector music_localizer(const LeadField& lf, const Matrix& q, const Matrix& r_basis);

ScanResult trap_music(const LeadField& lf, const SubspaceModel& sub, const ScanOptions& opts = {});

/// Wraps trap_music in a SourceEstimate: found sources get their least-squares
/// amplitudes over the window.
SourceEstimate trap_music_solve(const LeadField& lf, const Matrix& y, const ScanOptions& opts = {},
                                std::optional<int> n_tilde_hint = std::nullopt);

struct VariationOperator {
    std::vector<std::pair<int, int>> edges; ///< (lo, hi), lexicographic
    /// (edges * dof) x (sources * dof); row dof*e + c holds +1 at lo and -1 at hi, component c.
    Eigen::SparseMatrix<double> v;
    int n_sources = 0;
    int dof = 1;

    int n_edges() const { return static_cast<int>(edges.size()); }
};

VariationOperator variation_operator(const SourceSpace& ss);

struct SissyOptions {
    double lambda = 1.0;
    double alpha = 0.0; ///< 0 gives VB-SCCD
    double rho = 0.0;   ///< ADMM penalty; 0 picks s1(K)^2 / 10
    int max_iter = 500;
    double tol = 1e-6;
};

/// ADMM on 1/2|Y - K X|^2 + lambda (|V X|_1 + alpha |X|_1) with splits Z = V X and
/// W = X. The estimate returned is the best iterate seen (W when alpha > 0, so its
/// zeros are exact); objective_trace records the objective of that iterate and is
/// therefore non-increasing.
SourceEstimate sissy_solve(const LeadField& lf, const Matrix& y, const VariationOperator& vop,
                           const SissyOptions& opts);

double sissy_objective(const LeadField& lf, const Matrix& y, const VariationOperator& vop, double lambda,
                       double alpha, const Matrix& x);

/// Watershed segmentation of a per-source scalar map on the source adjacency.
/// Regions grow from local maxima in decreasing amplitude order; regions that meet
/// without a distinct extremum between them are merged; regions whose peak is
/// below `keep_fraction` of the global maximum are dropped. Returns the members
/// of the kept regions, ascending.
IndexList automatic_threshold(const Vector& map, const Adjacency& adjacency, double keep_fraction = 0.1);

} // namespace sparseloc
