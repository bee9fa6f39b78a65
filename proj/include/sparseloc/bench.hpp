#pragma once

// Monte-Carlo campaigns: every (space, test case, noise level, trial) draws one
// scenario, simulates it once, and runs every solver with and/or without CARSS on
// the same measurements, so all comparisons are paired.

#include "sparseloc/carss.hpp"
#include "sparseloc/headmodel.hpp"
#include "sparseloc/metrics.hpp"
#include "sparseloc/simulate.hpp"

#include <filesystem>
#include <optional>

namespace sparseloc {

struct SpaceConfig {
    std::string name = "sphere";
    SphereSpec sphere;
    int dof = 1;
    /// When set, the lead field is loaded from disk instead of generated.
    std::string leadfield_path;
};

struct SolverEntry {
    std::string name;
    std::string label; ///< defaults to name
    nlohmann::json params = nlohmann::json::object();
};

enum class CarssMode { off, on, both };

struct CampaignConfig {
    std::vector<SpaceConfig> spaces;
    std::vector<SolverEntry> solvers;
    std::vector<TestCaseSpec> test_cases;
    std::vector<NoiseSpec> noise;
    std::vector<ErpSpec> erps;
    int trials = 30;
    CarssMode carss = CarssMode::off;
    CarssOptions carss_options;
    EvaluationConfig evaluation;
    std::uint64_t seed = 1;
    std::string output_dir;
    int workers = 1;
    /// Wall time makes output machine dependent, so it is opt-in.
    bool record_wall_time = false;
    /// Rescale each simulated source so its scalp projection peaks at its waveform
    /// peak. Noise amplitudes are then relative to the signal, not to lead-field units.
    bool unit_peak_sources = true;
};

/// Desk-scale defaults: 110 mm sphere, ~2000 radial sources, 64 electrodes, the
/// three reference ERP shapes at 50 Hz, TC-I, no noise, sLORETA.
CampaignConfig default_campaign_config();
std::vector<ErpSpec> default_erps();

void to_json(nlohmann::json& j, const CampaignConfig& c);
/// Keys missing from `j` keep their defaults; unknown keys are errors.
void from_json(const nlohmann::json& j, CampaignConfig& c);
void validate(const CampaignConfig& c);

struct ReductionSummary {
    int kept = 0;
    double ratio = 0.0;
    int truth_retained = 0;
    bool fallback_used = false;
};

struct TrialResult {
    std::string test_case;
    std::string noise;
    std::string space;
    bool carss = false;
    std::string solver;
    int trial = 0;
    std::uint64_t seed = 0;
    IndexList truth;
    TrialMetrics metrics;
    std::optional<ReductionSummary> reduction;
    std::optional<double> wall_ms;
    bool failed = false;
    std::string error;
};

void to_json(nlohmann::json& j, const TrialResult& r);
void from_json(const nlohmann::json& j, TrialResult& r);

struct Stat {
    int n = 0;
    double mean = 0.0;
    double lo = 0.0; ///< 95% Student-t interval
    double hi = 0.0;
};

/// Mean and two-sided 95% Student-t interval; n = 0 gives NaNs, n = 1 a zero-width interval.
Stat mean_ci(const std::vector<double>& v);

struct Aggregate {
    std::string test_case, noise, space, solver;
    bool carss = false;
    int trials = 0;
    int failed = 0;
    Stat a_prime, sr_mean, dle_mm, sd_mm;
    /// A'(with CARSS) - A'(without) over trials where both succeeded; on CARSS rows of
    /// campaigns run with carss = both.
    std::optional<Stat> paired_diff;
};

struct CampaignResult {
    nlohmann::json config;
    std::vector<TrialResult> trials;
    std::vector<Aggregate> aggregates;
};

/// Per-space state shared read-only by all trials.
struct PreparedSpace {
    std::string name;
    LeadField lf; ///< column-normalized; used to simulate and to solve
    SignatureTable signatures;
};

PreparedSpace prepare_space(const SpaceConfig& sc, bool with_signatures);

/// Indices into the config lists.
struct Cell {
    int space = 0;
    int test_case = 0;
    int noise = 0;
    int solver = 0;
    bool carss = false;
};

std::uint64_t scenario_seed(const CampaignConfig& cfg, int space, int test_case, int trial);
std::uint64_t noise_seed(std::uint64_t scenario_seed, int noise);

/// Rescales each waveform so the source's scalp projection peaks at the waveform peak.
void scale_to_unit_peak(const LeadField& lf, Scenario& sc);

/// Simulates the trial's scenario and runs every requested solver/CARSS combination.
/// Failures are captured in the results, never thrown.
std::vector<TrialResult> run_trial_group(const CampaignConfig& cfg, const PreparedSpace& ps, int space, int test_case,
                                         int noise, int trial, const std::vector<Cell>& cells);

TrialResult run_trial(const CampaignConfig& cfg, const PreparedSpace& ps, const Cell& cell, int trial);

std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials);

/// Runs all cells x trials on cfg.workers threads. Output is independent of the
/// worker count. Writes reports when cfg.output_dir is set (checked before any trial runs).
CampaignResult run_campaign(const CampaignConfig& cfg);

// --- reports --------------------------------------------------------------------

inline constexpr const char* kTrialCsvHeader =
    "test_case,noise,space,carss,solver,trial,seed,a_prime,sr_mean,dle_mm,sd_mm,reduced_to,wall_ms,failed";

std::string trials_csv(const std::vector<TrialResult>& trials);
std::string aggregates_csv(const std::vector<Aggregate>& aggs);
nlohmann::json campaign_json(const CampaignResult& r);
CampaignResult campaign_from_json(const nlohmann::json& j);
std::string summary_markdown(const CampaignResult& r);

/// format: "csv" (trials.csv + aggregates.csv), "json" (campaign.json), "md" (summary.md).
void write_report(const CampaignResult& r, const std::string& format, const std::filesystem::path& dir);
void write_all_reports(const CampaignResult& r, const std::filesystem::path& dir);

/// Creates `dir` and proves it writable.
void ensure_writable_dir(const std::filesystem::path& dir);

} // namespace sparseloc
