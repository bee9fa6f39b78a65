#pragma once

#include "sparseloc/model.hpp"

namespace sparseloc {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankCutoff = 1e-12;

/// Pseudo-inverse of a symmetric matrix via eigendecomposition. Eigenvalues with
/// |lambda| <= cutoff * max|lambda| are dropped.
Matrix pinv_symmetric(const Matrix& a, double cutoff = kRankCutoff);

/// Pseudo-inverse of a general matrix via SVD with the same relative cutoff.
Matrix pinv(const Matrix& a, double cutoff = kRankCutoff);

/// Symmetric inverse square root (pseudo) of a small PSD matrix.
Matrix inv_sqrt_psd(const Matrix& a, double cutoff = kRankCutoff);

/// Largest eigenvalue of a x a^T, i.e. the squared spectral norm of a.
double spectral_norm_sq(const Matrix& a);

/// Per-source Euclidean norm over the dof rows of each time sample: (M x T).
Matrix source_norms(const Matrix& x, int dof);

} // namespace sparseloc
