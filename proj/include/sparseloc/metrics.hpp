#pragma once

#include "sparseloc/model.hpp"

#include <optional>
#include <utility>

namespace sparseloc {

struct EvaluationConfig {
    int neighborhood_levels = 2;
    double peak_floor_fraction = 0.1;
    /// Samples [begin, end) used to collapse amplitudes; nullopt is the whole window.
    std::optional<std::pair<int, int>> time_window;
};

void to_json(nlohmann::json& j, const EvaluationConfig& c);
void from_json(const nlohmann::json& j, EvaluationConfig& c);

/// Per-source RMS over the window of the per-sample norm across dof rows.
Vector collapse_amplitude(const Matrix& x, int dof, std::optional<std::pair<int, int>> window = std::nullopt);

/// Sources strictly above all level-1 neighbors, positive, and >= floor_fraction * max.
IndexList local_peaks(const Vector& map, const Adjacency& level1, double floor_fraction = 0.1);

/// Sources within `levels` hops of `center` on the level-1 graph, with hop counts.
std::vector<std::pair<int, int>> neighborhood_ball(const Adjacency& level1, int center, int levels);

struct SuccessRate {
    std::vector<int> hits; ///< per true source, 0/1
    double mean = 0.0;
};

SuccessRate success_rate(const IndexList& truth, const IndexList& peaks, const Adjacency& level1, int levels = 2);

struct HitFalse {
    double hr = 0.0;
    double fr = 0.0;
};

/// Greedy nearest-first (by hop count, then truth order, then peak index) one-to-one
/// matching of peaks to true sources inside the level ball.
HitFalse hit_false_rates(const IndexList& truth, const IndexList& peaks, const Adjacency& level1, int levels = 2);

double a_prime(double hr, double fr);

/// Symmetric average nearest-neighbor distance between the two position sets.
double dle(const std::vector<Vec3>& truth, const std::vector<Vec3>& estimate);

/// sqrt(sum d_q^2 s_q^2 / sum s_q^2), d_q the distance from source q to its nearest true source.
double spatial_dispersion(const Vector& map, const std::vector<Vec3>& truth, const std::vector<Vec3>& positions);

struct TrialMetrics {
    double a_prime = 0.0;
    double hr = 0.0;
    double fr = 0.0;
    std::vector<int> sr;
    double sr_mean = 0.0;
    std::optional<double> dle_mm; ///< undefined without estimated peaks
    std::optional<double> sd_mm;  ///< undefined for an all-zero estimate
    IndexList peaks;
};

TrialMetrics evaluate(const SourceSpace& ss, const IndexList& truth, const SourceEstimate& est,
                      const EvaluationConfig& cfg = {});

} // namespace sparseloc
