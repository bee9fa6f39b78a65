#include "sparseloc/headmodel.hpp"

#include "sparseloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sparseloc {

void to_json(nlohmann::json& j, const SphereSpec& s) {
    j = {{"head_radius", s.head_radius},
         {"conductivity", s.conductivity},
         {"grid_spacing", s.grid_spacing},
         {"electrode_count", s.electrode_count},
         {"electrode_cap_angle", s.electrode_cap_angle}};
}

void from_json(const nlohmann::json& j, SphereSpec& s) {
    SphereSpec d;
    s.head_radius = j.value("head_radius", d.head_radius);
    s.conductivity = j.value("conductivity", d.conductivity);
    s.grid_spacing = j.value("grid_spacing", d.grid_spacing);
    s.electrode_count = j.value("electrode_count", d.electrode_count);
    s.electrode_cap_angle = j.value("electrode_cap_angle", d.electrode_cap_angle);
}

Vector dipole_potential(const Vec3& position, const Vec3& moment, const std::vector<Vec3>& electrodes,
                        double sigma) {
    // mm geometry, nA*m moment, uV output: 1e-9 (moment) * 1e6 (m^-2 from mm^-2) * 1e6 (uV).
    const double scale = 1e3 / (4.0 * std::numbers::pi * sigma);
    Vector v(static_cast<Eigen::Index>(electrodes.size()));
    for (std::size_t i = 0; i < electrodes.size(); ++i) {
        const Vec3 d = electrodes[i] - position;
        const double r = d.norm();
        v(static_cast<Eigen::Index>(i)) = scale * moment.dot(d) / (r * r * r);
    }
    return v;
}

std::vector<Vec3> spiral_cap_electrodes(int count, double radius, double cap_angle_deg) {
    const double cos_cap = std::cos(cap_angle_deg * std::numbers::pi / 180.0);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        // Equal-area rings between the vertex and the cap boundary.
        const double z = 1.0 - (1.0 - cos_cap) * (i + 0.5) / count;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        Vec3 p(rho * std::cos(phi), rho * std::sin(phi), z);
        out.push_back(radius * p.normalized());
    }
    return out;
}

Adjacency electrode_adjacency(const std::vector<Vec3>& positions, int k) {
    const int n = static_cast<int>(positions.size());
    std::vector<std::vector<bool>> link(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> d;
        const Vec3 ui = positions[i].normalized();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double c = std::clamp(ui.dot(positions[j].normalized()), -1.0, 1.0);
            d.emplace_back(std::acos(c), j);
        }
        std::sort(d.begin(), d.end());
        for (int t = 0; t < std::min<int>(k, static_cast<int>(d.size())); ++t) {
            link[i][d[t].second] = true;
            link[d[t].second][i] = true;
        }
    }
    Adjacency adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (link[i][j]) adj[i].push_back(j);
    return adj;
}

std::vector<Vec3> grid_positions(double spacing, double max_radius) {
    std::vector<Vec3> out;
    const int half = static_cast<int>(std::floor(max_radius / spacing));
    for (int ix = -half; ix <= half; ++ix)
        for (int iy = -half; iy <= half; ++iy)
            for (int iz = -half; iz <= half; ++iz) {
                Vec3 p(ix * spacing, iy * spacing, iz * spacing);
                if (p.norm() < max_radius) out.push_back(p);
            }
    return out;
}

LeadField generate_sphere_leadfield(const SphereSpec& spec, int dof) {
    if (dof != 1 && dof != 3) throw ConfigError("dof must be 1 or 3");
    if (!(spec.head_radius > 0.0)) throw ConfigError("head_radius must be positive");
    if (!(spec.grid_spacing > 0.0)) throw ConfigError("grid_spacing must be positive");
    if (spec.electrode_count < 2) throw ConfigError("electrode_count must be at least 2");
    if (!(spec.conductivity > 0.0)) throw ConfigError("conductivity must be positive");

    auto ss = std::make_shared<SourceSpace>();
    ss->dof = dof;
    ss->head_radius = spec.head_radius;
    ss->grid_spacing = spec.grid_spacing;
    ss->positions = grid_positions(spec.grid_spacing, kSourceRadiusFraction * spec.head_radius);
    if (ss->positions.empty()) throw ConfigError("empty source space");
    for (const auto& p : ss->positions) {
        if (dof == 3) {
            ss->orientations.emplace_back(std::nullopt);
        } else {
            ss->orientations.emplace_back(p.norm() > 0.0 ? Vec3(p.normalized()) : Vec3::UnitZ());
        }
    }
    ss->adjacency = grid_adjacency(*ss, 1);

    auto ea = std::make_shared<ElectrodeArray>();
    ea->radius = spec.head_radius;
    ea->count = spec.electrode_count;
    ea->positions = spiral_cap_electrodes(spec.electrode_count, spec.head_radius, spec.electrode_cap_angle);
    ea->adjacency = electrode_adjacency(ea->positions);

    LeadField lf;
    lf.gain.resize(spec.electrode_count, static_cast<Eigen::Index>(ss->size()) * dof);
    for (int j = 0; j < ss->size(); ++j) {
        if (dof == 1) {
            lf.gain.col(j) = dipole_potential(ss->positions[j], *ss->orientations[j], ea->positions,
                                              spec.conductivity);
        } else {
            for (int c = 0; c < 3; ++c)
                lf.gain.col(3 * j + c) = dipole_potential(ss->positions[j], Vec3::Unit(c), ea->positions,
                                                          spec.conductivity);
        }
    }
    lf.column_weights = Vector::Ones(lf.gain.cols());
    lf.sources = std::move(ss);
    lf.electrodes = std::move(ea);
    lf.normalized = false;
    return lf;
}

LeadField normalize_columns(const LeadField& lf) {
    if (lf.normalized) return lf;
    LeadField out = lf;
    out.column_weights.resize(lf.gain.cols());
    for (Eigen::Index c = 0; c < lf.gain.cols(); ++c) {
        const double n = lf.gain.col(c).norm();
        if (!(n > 0.0)) throw DataError("degenerate source column " + std::to_string(c));
        out.gain.col(c) /= n;
        out.column_weights(c) = n;
    }
    out.normalized = true;
    return out;
}

Adjacency expand_adjacency(const Adjacency& level1, int levels) {
    const int n = static_cast<int>(level1.size());
    Adjacency out(n);
    std::vector<int> depth(n, -1);
    std::vector<int> frontier, next;
    for (int s = 0; s < n; ++s) {
        std::vector<int> touched{s};
        depth[s] = 0;
        frontier.assign(1, s);
        for (int l = 1; l <= levels && !frontier.empty(); ++l) {
            next.clear();
            for (int u : frontier)
                for (int v : level1[u])
                    if (depth[v] < 0) {
                        depth[v] = l;
                        touched.push_back(v);
                        next.push_back(v);
                    }
            frontier.swap(next);
        }
        for (int v : touched) {
            if (v != s) out[s].push_back(v);
            depth[v] = -1;
        }
        std::sort(out[s].begin(), out[s].end());
    }
    return out;
}

Adjacency grid_adjacency(const SourceSpace& ss, int levels) {
    if (levels < 1) throw ConfigError("levels must be positive");
    if (!(ss.grid_spacing > 0.0)) throw ConfigError("grid adjacency requires a known grid spacing");
    const double reach = std::sqrt(3.0) * ss.grid_spacing + 1e-6 * ss.grid_spacing;
    const int n = ss.size();

    // Sweep along x so only a slab of candidates is tested per source.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ss.positions[a].x() < ss.positions[b].x(); });
    Adjacency level1(n);
    for (int a = 0; a < n; ++a) {
        const Vec3& pa = ss.positions[order[a]];
        for (int b = a + 1; b < n; ++b) {
            const Vec3& pb = ss.positions[order[b]];
            if (pb.x() - pa.x() > reach) break;
            if ((pa - pb).norm() <= reach) {
                level1[order[a]].push_back(order[b]);
                level1[order[b]].push_back(order[a]);
            }
        }
    }
    for (auto& l : level1) std::sort(l.begin(), l.end());
    if (levels == 1) return level1;
    return expand_adjacency(level1, levels);
}

} // namespace sparseloc
