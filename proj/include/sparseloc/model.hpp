#pragma once

// Core domain types. Geometry is in mm, potentials in uV, rates in Hz.
// Objects are plain values; shared pieces (source space, electrodes) are held
// through shared_ptr<const T> so lead fields and restricted copies can share them.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sparseloc {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;
using Adjacency = std::vector<IndexList>;

/// A dipole orientation; std::nullopt is the "free" marker.
using Orientation = std::optional<Vec3>;

struct SourceSpace {
    std::vector<Vec3> positions;
    std::vector<Orientation> orientations;
    int dof = 1;
    Adjacency adjacency;
    double head_radius = 0.0;
    /// Inter-dipole distance of the regular grid; 0 when the layout is not a grid.
    double grid_spacing = 0.0;

    int size() const { return static_cast<int>(positions.size()); }
};

struct ElectrodeArray {
    /// Empty when a lead field was loaded without geometry.
    std::vector<Vec3> positions;
    Adjacency adjacency;
    double radius = 0.0;
    int count = 0;

    bool has_geometry() const { return !positions.empty(); }
};

struct LeadField {
    /// N x (dof * M); column dof*j + c belongs to source j, component c.
    Matrix gain;
    Vector column_weights;
    std::shared_ptr<const SourceSpace> sources;
    std::shared_ptr<const ElectrodeArray> electrodes;
    bool normalized = false;

    int n_electrodes() const { return static_cast<int>(gain.rows()); }
    int n_sources() const { return sources ? sources->size() : 0; }
    int dof() const { return sources ? sources->dof : 1; }
    int n_columns() const { return static_cast<int>(gain.cols()); }

    /// Columns of source j (N x dof view).
    auto block(int j) const { return gain.middleCols(static_cast<Eigen::Index>(j) * dof(), dof()); }

    /// Lead field restricted to `kept` sources. The source space is re-indexed and
    /// its adjacency becomes the induced subgraph.
    LeadField restrict_to(const IndexList& kept) const;
};

enum class NoiseKind { none, white, pink, brown, sensor_percent };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double amplitude = 0.0;

    bool operator==(const NoiseSpec&) const = default;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);
/// "none", "pink-1", "sensor-5", ...
std::string noise_label(const NoiseSpec& spec);

struct Scenario {
    IndexList active_indices;
    std::vector<Orientation> active_orientations;
    /// One row per active source, T columns (uV).
    Matrix waveforms;
    double fs = 1000.0;
    NoiseSpec noise;
    std::uint64_t seed = 0;
    /// Number of leading pre-stimulus samples that carry no source activity.
    int baseline_samples = 0;

    int n_samples() const { return static_cast<int>(waveforms.cols()); }
};

struct Measurements {
    Matrix data;
    double fs = 1000.0;
    std::string provenance;
    int baseline_samples = 0;
};

struct Diagnostics {
    std::vector<double> gamma;
    std::vector<double> localizer_trace;
    IndexList reduced_indices;
    IndexList found_indices;
    std::vector<double> objective_trace;
    std::vector<int> support_trace;
    double alpha = 0.0;
    double noise_variance = 0.0;

    bool operator==(const Diagnostics&) const = default;
};

struct SourceEstimate {
    /// (dof * M) x T
    Matrix amplitudes;
    std::string solver_name;
    int iterations_used = 0;
    bool converged = true;
    double residual_norm = 0.0;
    Diagnostics extras;
};

// --- validation ---------------------------------------------------------------

using Violations = std::vector<std::string>;

Violations validate(const SourceSpace& ss);
Violations validate(const ElectrodeArray& ea);
Violations validate(const LeadField& lf);
Violations validate(const Scenario& sc, int n_sources);
Violations validate(const Measurements& m, int n_electrodes);
Violations validate(const SourceEstimate& est, const LeadField& lf);

/// Throws ConfigError listing all violations when the list is non-empty.
void require_valid(const Violations& v, const std::string& what);

// --- serialization --------------------------------------------------------------

void to_json(nlohmann::json& j, const SourceSpace& ss);
void from_json(const nlohmann::json& j, SourceSpace& ss);
void to_json(nlohmann::json& j, const ElectrodeArray& ea);
void from_json(const nlohmann::json& j, ElectrodeArray& ea);
void to_json(nlohmann::json& j, const NoiseSpec& n);
void from_json(const nlohmann::json& j, NoiseSpec& n);
void to_json(nlohmann::json& j, const Scenario& sc);
void from_json(const nlohmann::json& j, Scenario& sc);
void to_json(nlohmann::json& j, const Measurements& m);
void from_json(const nlohmann::json& j, Measurements& m);
void to_json(nlohmann::json& j, const Diagnostics& d);
void from_json(const nlohmann::json& j, Diagnostics& d);
void to_json(nlohmann::json& j, const SourceEstimate& e);
void from_json(const nlohmann::json& j, SourceEstimate& e);
/// Inline form (gain embedded); the two-file on-disk format lives in leadfield_io.
void to_json(nlohmann::json& j, const LeadField& lf);
void from_json(const nlohmann::json& j, LeadField& lf);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

} // namespace sparseloc
