#pragma once

#include "sparseloc/model.hpp"

#include <limits>
#include <string>

namespace sparseloc {

struct ErpPeak {
    double latency_ms = 0.0;
    double width_ms = 1.0; ///< full width at half maximum
    double amplitude = 0.0; ///< uV

    bool operator==(const ErpPeak&) const = default;
};

struct ErpSpec {
    std::vector<ErpPeak> peaks;
    double duration_ms = 1000.0;
    double fs = 1000.0;

    int n_samples() const;
    bool operator==(const ErpSpec&) const = default;
};

void to_json(nlohmann::json& j, const ErpSpec& e);
void from_json(const nlohmann::json& j, ErpSpec& e);

/// Sum of Gaussian peaks; sample t sits at t / fs seconds.
Vector erp_waveform(const ErpSpec& spec);

/// A group of sources sharing a depth band. `max_within_distance` bounds the
/// pairwise distance inside the group (e.g. clustered deep sources).
struct DepthBand {
    std::string label;
    int count = 1;
    double min_radius = 0.0;
    double max_radius = std::numeric_limits<double>::infinity();
    double max_within_distance = std::numeric_limits<double>::infinity();
};

struct TestCaseSpec {
    std::string name;
    std::vector<DepthBand> bands;
    /// Lower bound on every pairwise source distance (mm).
    double min_pairwise_distance = 0.0;

    int n_sources() const;
};

void to_json(nlohmann::json& j, const TestCaseSpec& t);
void from_json(const nlohmann::json& j, TestCaseSpec& t);

/// Built-in cases: "TC-I" .. "TC-IV" and "CARSS-deep" (one source with |r| <= 40 mm).
TestCaseSpec test_case_preset(const std::string& name);

/// True when the indices satisfy every predicate of `tc` (bands in declaration order).
bool satisfies(const TestCaseSpec& tc, const SourceSpace& ss, const IndexList& indices);

inline constexpr long kMaxRejections = 1'000'000;

/// Draws source indices (per band, uniformly among eligible sources) until all
/// predicates hold. dof=1 sources take their fixed orientation; dof=3 sources get
/// a random unit orientation. Source i uses erps[i % erps.size()].
Scenario sample_scenario(const TestCaseSpec& tc, const SourceSpace& ss, const std::vector<ErpSpec>& erps,
                         const NoiseSpec& noise, std::uint64_t seed);

/// Ground-truth source matrix ((dof*M) x T) for a scenario. With dof=1 the scenario
/// orientation is projected on the fixed source orientation; a free marker is a
/// config error. With dof=3 a free marker drives the radial direction.
Matrix truth_matrix(const LeadField& lf, const Scenario& sc);

/// Y = K X + E with E drawn from scenario.noise and scenario.seed.
Measurements simulate_measurements(const LeadField& lf, const Scenario& sc);

/// Independent per-channel noise, each channel rescaled to max|.| == amplitude.
/// Pink and brown shape a white Gaussian spectrum by 1/f and 1/f^2 in power.
Matrix gen_noise(NoiseKind kind, double amplitude, int n_channels, int n_samples, double fs, std::uint64_t seed);

/// Adds i.i.d. Gaussian noise with std = percent/100 * max|Y|.
Measurements add_sensor_noise(const Measurements& y, double percent, std::uint64_t seed);

} // namespace sparseloc
