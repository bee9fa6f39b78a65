#pragma once

#include "sparseloc/model.hpp"

namespace sparseloc {

enum class FocussInit { uniform, mne };
enum class SblVariant { wipf, zhang };

struct SparseSolverOptions {
    int max_iter = 100;
    double tol = 1e-6;
    double alpha = 0.0;
    FocussInit focuss_init = FocussInit::uniform;
    SblVariant sbl_variant = SblVariant::wipf;
    double wipf_lambda = 0.2;
    double zhang_prune = 1e-3;
    int reweight_rounds = 0;
    /// Leading noise-only samples of Y; used by the zhang noise estimate.
    int baseline_samples = 0;
};

void validate_options(const SparseSolverOptions& o);

struct FocussResult {
    Vector x;
    int iterations_used = 0;
    bool converged = false;
};

/// Entries below this fraction of max|x| are set to exactly zero after each step.
inline constexpr double kFocussPrune = 1e-8;
inline constexpr int kZhangMaxIter = 50;

FocussResult focuss_solve(const LeadField& lf, const Vector& y, const SparseSolverOptions& opts);

/// FOCUSS applied independently to every time sample.
SourceEstimate focuss_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts);

/// Group soft-threshold over blocks of `dof` consecutive rows (all columns).
Matrix prox_l21(const Matrix& x, double threshold, int dof = 1);

/// Smallest alpha for which the mixed-norm solution is identically zero.
double mxne_alpha_max(const LeadField& lf, const Matrix& y);

SourceEstimate mxne_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts);
SourceEstimate irmxne_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts);

/// Negative log marginal likelihood log|S| + tr(Y^T S^-1 Y)/T for
/// S = K diag(gamma) K^T + sigma2 I (gamma per source, shared over its dof).
double sbl_cost(const LeadField& lf, const Matrix& y, const std::vector<double>& gamma, double sigma2);

SourceEstimate sbl_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts);

} // namespace sparseloc
