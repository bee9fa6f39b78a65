#pragma once

#include "sparseloc/model.hpp"

#include <string>

namespace sparseloc {

struct SphereSpec {
    double head_radius = 85.0;      ///< mm
    double conductivity = 0.33;     ///< S/m
    double grid_spacing = 10.0;     ///< mm
    int electrode_count = 64;
    double electrode_cap_angle = 120.0; ///< polar angle covered from the vertex, degrees

    bool operator==(const SphereSpec&) const = default;
};

void to_json(nlohmann::json& j, const SphereSpec& s);
void from_json(const nlohmann::json& j, SphereSpec& s);

/// Sources occupy grid points strictly inside this fraction of the head radius.
inline constexpr double kSourceRadiusFraction = 0.9;

/// Potential (uV) at each electrode of a dipole with moment `moment` (nA*m) at
/// `position` in an infinite homogeneous conductor of conductivity `sigma`.
Vector dipole_potential(const Vec3& position, const Vec3& moment, const std::vector<Vec3>& electrodes,
                        double sigma);

/// Golden-angle spiral on the cap of polar angle `cap_angle_deg` around +z.
std::vector<Vec3> spiral_cap_electrodes(int count, double radius, double cap_angle_deg);

/// k nearest neighbors by geodesic (angular) distance, symmetrized.
Adjacency electrode_adjacency(const std::vector<Vec3>& positions, int k = 6);

/// Regular grid positions strictly inside `max_radius`, ordered by (x, y, z).
std::vector<Vec3> grid_positions(double spacing, double max_radius);

/// Synthetic spherical lead field. dof=1 uses radial orientations (+z at the origin);
/// dof=3 leaves orientations free with columns along x, y, z.
LeadField generate_sphere_leadfield(const SphereSpec& spec, int dof);

/// Column-normalized copy with the original norms stored in column_weights.
/// A lead field already flagged as normalized is returned unchanged.
LeadField normalize_columns(const LeadField& lf);

/// Neighbor sets: level 1 is every source within sqrt(3) * spacing (+1e-6 * spacing);
/// level k is the k-fold closure. Self is excluded.
Adjacency grid_adjacency(const SourceSpace& ss, int levels);

/// k-fold closure of a level-1 graph, excluding self. Sets are sorted.
Adjacency expand_adjacency(const Adjacency& level1, int levels);

} // namespace sparseloc
