#pragma once

// Certainty-based reduction of the solution space. Stage I matches scalp peaks in
// the measurements against per-column peak signatures of the lead field and keeps
// the sources that match well; stage II runs any solver on the kept columns.

#include "sparseloc/model.hpp"

#include <functional>

namespace sparseloc {

struct PeakSignature {
    int peak = 0;            ///< electrode with the largest |topography|
    IndexList electrodes;    ///< peak followed by its level-1 neighbors, ascending
    Vector shape;            ///< unit-norm topography on `electrodes`
};

using SignatureTable = std::vector<PeakSignature>; ///< one entry per lead-field column

struct CarssOptions {
    double tau = 0.5;
    int sample_stride = 10;
    double peak_floor = 0.2; ///< fraction of max|y_t| a scalp peak must exceed
};

void to_json(nlohmann::json& j, const CarssOptions& o);
void from_json(const nlohmann::json& j, CarssOptions& o);

struct ReductionReport {
    IndexList kept;                       ///< ascending source indices
    std::vector<double> certainty;        ///< per kept source
    std::vector<int> sampled_times;
    std::vector<IndexList> peaks;         ///< detected electrodes per sampled time
    int n_sources = 0;
    bool fallback_used = false;

    double ratio() const { return n_sources ? static_cast<double>(kept.size()) / n_sources : 0.0; }
};

void to_json(nlohmann::json& j, const ReductionReport& r);

SignatureTable build_signatures(const LeadField& lf, const Adjacency& electrode_adjacency);

/// Electrodes whose |value| strictly exceeds every level-1 neighbor and
/// `floor_fraction` * max|y_t|.
IndexList detect_scalp_peaks(const Vector& y_t, const Adjacency& electrode_adjacency, double floor_fraction = 0.2);

/// |cosine| between the signature shape and y_t on the signature electrodes,
/// provided a detected peak sits on or next to the signature peak; 0 otherwise.
double certainty(const PeakSignature& sig, const Vector& y_t, const IndexList& detected_peaks,
                 const Adjacency& electrode_adjacency);

/// Per-source certainty (max over dof columns and sampled times), kept set for
/// certainty >= tau, padded to at least min(N, M) sources by descending certainty
/// (lowest index first on ties).
ReductionReport reduce_solution_space(const LeadField& lf, const SignatureTable& sigs, const Matrix& y,
                                      const CarssOptions& opts = {});

using SolverFn = std::function<SourceEstimate(const LeadField&, const Matrix&)>;

/// Runs `solver` on the kept columns and scatters the result to full size.
SourceEstimate solve_reduced(const SolverFn& solver, const LeadField& lf, const Matrix& y,
                             const ReductionReport& report);

} // namespace sparseloc
