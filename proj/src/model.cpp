#include "sparseloc/model.hpp"

#include "sparseloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace sparseloc {

namespace {

constexpr double kUnitTol = 1e-9;

bool all_finite(const Matrix& m) { return m.allFinite(); }

void check_adjacency(const Adjacency& adj, int n, Violations& out) {
    if (adj.empty()) return;
    if (static_cast<int>(adj.size()) != n) {
        out.emplace_back("adjacency size does not match element count");
        return;
    }
    std::vector<std::set<int>> sets(n);
    for (int i = 0; i < n; ++i) {
        for (int j : adj[i]) {
            if (j < 0 || j >= n) {
                out.emplace_back("adjacency index out of range");
                return;
            }
            if (j == i) {
                out.emplace_back("adjacency contains self loop");
                return;
            }
            sets[i].insert(j);
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j : sets[i]) {
            if (!sets[j].count(i)) {
                out.emplace_back("asymmetric adjacency");
                return;
            }
        }
    }
}

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

nlohmann::json orientation_to_json(const Orientation& o) {
    if (!o) return "free";
    return vec3_to_json(*o);
}

Orientation orientation_from_json(const nlohmann::json& j) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "free")) return std::nullopt;
    return vec3_from_json(j);
}

} // namespace

LeadField LeadField::restrict_to(const IndexList& kept) const {
    const int d = dof();
    const int m = n_sources();
    std::vector<int> remap(m, -1);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        if (kept[k] < 0 || kept[k] >= m) throw ConfigError("restriction index out of range");
        remap[kept[k]] = static_cast<int>(k);
    }

    auto ss = std::make_shared<SourceSpace>();
    ss->dof = d;
    ss->head_radius = sources->head_radius;
    ss->grid_spacing = sources->grid_spacing;
    const bool has_adj = !sources->adjacency.empty();
    for (int j : kept) {
        ss->positions.push_back(sources->positions[j]);
        ss->orientations.push_back(sources->orientations[j]);
        if (has_adj) {
            IndexList nb;
            for (int n : sources->adjacency[j])
                if (remap[n] >= 0) nb.push_back(remap[n]);
            std::sort(nb.begin(), nb.end());
            ss->adjacency.push_back(std::move(nb));
        }
    }

    LeadField out;
    out.gain.resize(gain.rows(), static_cast<Eigen::Index>(kept.size()) * d);
    out.column_weights.resize(out.gain.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.gain.middleCols(static_cast<Eigen::Index>(k) * d, d) = block(kept[k]);
        out.column_weights.segment(static_cast<Eigen::Index>(k) * d, d) =
            column_weights.segment(static_cast<Eigen::Index>(kept[k]) * d, d);
    }
    out.sources = std::move(ss);
    out.electrodes = electrodes;
    out.normalized = normalized;
    return out;
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::brown: return "brown";
    case NoiseKind::sensor_percent: return "sensor_percent";
    }
    return "none";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseKind::none;
    if (s == "white") return NoiseKind::white;
    if (s == "pink") return NoiseKind::pink;
    if (s == "brown") return NoiseKind::brown;
    if (s == "sensor_percent" || s == "sensor") return NoiseKind::sensor_percent;
    throw ConfigError("unknown noise kind '" + s + "'");
}

std::string noise_label(const NoiseSpec& spec) {
    if (spec.kind == NoiseKind::none) return "none";
    std::ostringstream os;
    os << (spec.kind == NoiseKind::sensor_percent ? "sensor" : to_string(spec.kind)) << '-' << spec.amplitude;
    return os.str();
}

// --- validation ---------------------------------------------------------------

Violations validate(const SourceSpace& ss) {
    Violations out;
    if (ss.dof != 1 && ss.dof != 3) out.emplace_back("dof must be 1 or 3");
    if (ss.orientations.size() != ss.positions.size())
        out.emplace_back("orientation count does not match source count");
    for (std::size_t i = 0; i < ss.orientations.size(); ++i) {
        const auto& o = ss.orientations[i];
        if (!o) {
            if (ss.dof == 1) {
                out.emplace_back("free orientation with dof=1");
                break;
            }
            continue;
        }
        if (std::abs(o->norm() - 1.0) > kUnitTol) {
            out.emplace_back("non-unit orientation");
            break;
        }
    }
    if (ss.head_radius > 0.0) {
        for (const auto& p : ss.positions) {
            if (!(p.norm() < ss.head_radius)) {
                out.emplace_back("position outside head radius");
                break;
            }
        }
    }
    check_adjacency(ss.adjacency, ss.size(), out);
    return out;
}

Violations validate(const ElectrodeArray& ea) {
    Violations out;
    if (ea.count < 2) out.emplace_back("electrode count below 2");
    if (ea.has_geometry()) {
        if (static_cast<int>(ea.positions.size()) != ea.count)
            out.emplace_back("electrode position count does not match count");
        for (const auto& p : ea.positions) {
            if (std::abs(p.norm() - ea.radius) > 1e-6 * ea.radius) {
                out.emplace_back("electrode off the scalp sphere");
                break;
            }
        }
    }
    check_adjacency(ea.adjacency, ea.count, out);
    return out;
}

Violations validate(const LeadField& lf) {
    Violations out;
    if (!lf.sources) {
        out.emplace_back("missing source space");
        return out;
    }
    if (!lf.electrodes) {
        out.emplace_back("missing electrode array");
        return out;
    }
    for (auto& v : validate(*lf.sources)) out.push_back("source space: " + v);
    for (auto& v : validate(*lf.electrodes)) out.push_back("electrodes: " + v);
    if (lf.gain.rows() != lf.electrodes->count) out.emplace_back("gain rows do not match electrode count");
    if (lf.gain.cols() != static_cast<Eigen::Index>(lf.dof()) * lf.n_sources())
        out.emplace_back("gain columns do not match dof * sources");
    if (!all_finite(lf.gain)) out.emplace_back("non-finite gain entry");
    if (lf.column_weights.size() != lf.gain.cols()) {
        out.emplace_back("column weight count does not match columns");
    } else if (!(lf.column_weights.array() > 0.0).all()) {
        out.emplace_back("non-positive column weight");
    }
    if (lf.normalized && all_finite(lf.gain)) {
        for (Eigen::Index c = 0; c < lf.gain.cols(); ++c) {
            if (std::abs(lf.gain.col(c).norm() - 1.0) > kUnitTol) {
                out.emplace_back("normalized lead field has non-unit column");
                break;
            }
        }
    }
    return out;
}

Violations validate(const Scenario& sc, int n_sources) {
    Violations out;
    std::set<int> seen;
    for (int i : sc.active_indices) {
        if (i < 0 || i >= n_sources) out.emplace_back("active index out of range");
        if (!seen.insert(i).second) out.emplace_back("duplicate active index");
    }
    if (sc.active_orientations.size() != sc.active_indices.size())
        out.emplace_back("orientation count does not match active sources");
    if (sc.waveforms.rows() != static_cast<Eigen::Index>(sc.active_indices.size()))
        out.emplace_back("waveform count does not match active sources");
    if (sc.waveforms.cols() < 1) out.emplace_back("waveforms must have at least one sample");
    if (!(sc.fs > 0.0)) out.emplace_back("sample rate must be positive");
    if (!all_finite(sc.waveforms)) out.emplace_back("non-finite waveform sample");
    if (sc.noise.kind != NoiseKind::none && !(sc.noise.amplitude >= 0.0))
        out.emplace_back("negative noise amplitude");
    return out;
}

Violations validate(const Measurements& m, int n_electrodes) {
    Violations out;
    if (!all_finite(m.data)) out.emplace_back("non-finite measurement");
    if (m.data.rows() != n_electrodes) out.emplace_back("measurement rows do not match electrode count");
    if (!(m.fs > 0.0)) out.emplace_back("sample rate must be positive");
    return out;
}

Violations validate(const SourceEstimate& est, const LeadField& lf) {
    Violations out;
    if (!all_finite(est.amplitudes)) out.emplace_back("non-finite estimate");
    if (est.amplitudes.rows() != lf.n_columns()) out.emplace_back("estimate rows do not match lead field columns");
    return out;
}

void require_valid(const Violations& v, const std::string& what) {
    if (v.empty()) return;
    std::string msg = what + ": ";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) msg += "; ";
        msg += v[i];
    }
    throw ConfigError(msg);
}

// --- serialization --------------------------------------------------------------

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"order", "column-major"}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError("matrix data length does not match its declared shape");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows * cols; ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return m;
}

void to_json(nlohmann::json& j, const SourceSpace& ss) {
    nlohmann::json pos = nlohmann::json::array(), ori = nlohmann::json::array();
    for (const auto& p : ss.positions) pos.push_back(vec3_to_json(p));
    for (const auto& o : ss.orientations) ori.push_back(orientation_to_json(o));
    j = {{"positions", std::move(pos)},
         {"orientations", std::move(ori)},
         {"dof", ss.dof},
         {"adjacency", ss.adjacency},
         {"head_radius", ss.head_radius},
         {"grid_spacing", ss.grid_spacing}};
}

void from_json(const nlohmann::json& j, SourceSpace& ss) {
    ss = SourceSpace{};
    for (const auto& p : j.at("positions")) ss.positions.push_back(vec3_from_json(p));
    for (const auto& o : j.at("orientations")) ss.orientations.push_back(orientation_from_json(o));
    ss.dof = j.at("dof").get<int>();
    if (j.contains("adjacency")) ss.adjacency = j.at("adjacency").get<Adjacency>();
    ss.head_radius = j.value("head_radius", 0.0);
    ss.grid_spacing = j.value("grid_spacing", 0.0);
}

void to_json(nlohmann::json& j, const ElectrodeArray& ea) {
    nlohmann::json pos = nlohmann::json::array();
    for (const auto& p : ea.positions) pos.push_back(vec3_to_json(p));
    j = {{"positions", std::move(pos)}, {"adjacency", ea.adjacency}, {"radius", ea.radius}, {"count", ea.count}};
}

void from_json(const nlohmann::json& j, ElectrodeArray& ea) {
    ea = ElectrodeArray{};
    if (j.contains("positions"))
        for (const auto& p : j.at("positions")) ea.positions.push_back(vec3_from_json(p));
    if (j.contains("adjacency")) ea.adjacency = j.at("adjacency").get<Adjacency>();
    ea.radius = j.value("radius", 0.0);
    ea.count = j.value("count", static_cast<int>(ea.positions.size()));
}

void to_json(nlohmann::json& j, const NoiseSpec& n) {
    j = {{"kind", to_string(n.kind)}, {"amplitude", n.amplitude}};
}

void from_json(const nlohmann::json& j, NoiseSpec& n) {
    n.kind = noise_kind_from_string(j.value("kind", std::string("none")));
    n.amplitude = j.value("amplitude", 0.0);
}

void to_json(nlohmann::json& j, const Scenario& sc) {
    nlohmann::json ori = nlohmann::json::array();
    for (const auto& o : sc.active_orientations) ori.push_back(orientation_to_json(o));
    j = {{"active_indices", sc.active_indices},
         {"active_orientations", std::move(ori)},
         {"waveforms", matrix_to_json(sc.waveforms)},
         {"fs", sc.fs},
         {"noise", sc.noise},
         {"seed", sc.seed},
         {"baseline_samples", sc.baseline_samples}};
}

void from_json(const nlohmann::json& j, Scenario& sc) {
    sc = Scenario{};
    sc.active_indices = j.at("active_indices").get<IndexList>();
    for (const auto& o : j.at("active_orientations")) sc.active_orientations.push_back(orientation_from_json(o));
    sc.waveforms = matrix_from_json(j.at("waveforms"));
    sc.fs = j.at("fs").get<double>();
    if (j.contains("noise")) sc.noise = j.at("noise").get<NoiseSpec>();
    sc.seed = j.value("seed", std::uint64_t{0});
    sc.baseline_samples = j.value("baseline_samples", 0);
}

void to_json(nlohmann::json& j, const Measurements& m) {
    j = {{"data", matrix_to_json(m.data)},
         {"fs", m.fs},
         {"provenance", m.provenance},
         {"baseline_samples", m.baseline_samples}};
}

void from_json(const nlohmann::json& j, Measurements& m) {
    m.data = matrix_from_json(j.at("data"));
    m.fs = j.at("fs").get<double>();
    m.provenance = j.value("provenance", std::string{});
    m.baseline_samples = j.value("baseline_samples", 0);
}

void to_json(nlohmann::json& j, const Diagnostics& d) {
    j = {{"gamma", d.gamma},
         {"localizer_trace", d.localizer_trace},
         {"reduced_indices", d.reduced_indices},
         {"found_indices", d.found_indices},
         {"objective_trace", d.objective_trace},
         {"support_trace", d.support_trace},
         {"alpha", d.alpha},
         {"noise_variance", d.noise_variance}};
}

void from_json(const nlohmann::json& j, Diagnostics& d) {
    d = Diagnostics{};
    d.gamma = j.value("gamma", std::vector<double>{});
    d.localizer_trace = j.value("localizer_trace", std::vector<double>{});
    d.reduced_indices = j.value("reduced_indices", IndexList{});
    d.found_indices = j.value("found_indices", IndexList{});
    d.objective_trace = j.value("objective_trace", std::vector<double>{});
    d.support_trace = j.value("support_trace", std::vector<int>{});
    d.alpha = j.value("alpha", 0.0);
    d.noise_variance = j.value("noise_variance", 0.0);
}

void to_json(nlohmann::json& j, const SourceEstimate& e) {
    j = {{"solver", e.solver_name},
         {"iterations_used", e.iterations_used},
         {"converged", e.converged},
         {"residual_norm", e.residual_norm},
         {"amplitudes", matrix_to_json(e.amplitudes)},
         {"extras", e.extras}};
}

void from_json(const nlohmann::json& j, SourceEstimate& e) {
    e.solver_name = j.at("solver").get<std::string>();
    e.iterations_used = j.at("iterations_used").get<int>();
    e.converged = j.at("converged").get<bool>();
    e.residual_norm = j.at("residual_norm").get<double>();
    e.amplitudes = matrix_from_json(j.at("amplitudes"));
    e.extras = j.value("extras", Diagnostics{});
}

void to_json(nlohmann::json& j, const LeadField& lf) {
    j = {{"gain", matrix_to_json(lf.gain)},
         {"column_weights", std::vector<double>(lf.column_weights.data(),
                                                lf.column_weights.data() + lf.column_weights.size())},
         {"sources", lf.sources ? nlohmann::json(*lf.sources) : nlohmann::json()},
         {"electrodes", lf.electrodes ? nlohmann::json(*lf.electrodes) : nlohmann::json()},
         {"normalized", lf.normalized}};
}

void from_json(const nlohmann::json& j, LeadField& lf) {
    lf.gain = matrix_from_json(j.at("gain"));
    const auto w = j.at("column_weights").get<std::vector<double>>();
    lf.column_weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    lf.sources = std::make_shared<SourceSpace>(j.at("sources").get<SourceSpace>());
    lf.electrodes = std::make_shared<ElectrodeArray>(j.at("electrodes").get<ElectrodeArray>());
    lf.normalized = j.at("normalized").get<bool>();
}

} // namespace sparseloc
