#include "sparseloc/leadfield_io.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/headmodel.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace sparseloc {

namespace {

std::uint64_t byteswap64(std::uint64_t v) {
    v = ((v & 0x00000000FFFFFFFFULL) << 32) | ((v & 0xFFFFFFFF00000000ULL) >> 32);
    v = ((v & 0x0000FFFF0000FFFFULL) << 16) | ((v & 0xFFFF0000FFFF0000ULL) >> 16);
    v = ((v & 0x00FF00FF00FF00FFULL) << 8) | ((v & 0xFF00FF00FF00FF00ULL) >> 8);
    return v;
}

nlohmann::json positions_json(const std::vector<Vec3>& ps) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back({p.x(), p.y(), p.z()});
    return a;
}

std::vector<Vec3> positions_from(const nlohmann::json& a) {
    std::vector<Vec3> out;
    for (const auto& p : a) {
        if (!p.is_array() || p.size() != 3) throw ParseError("position entries must be 3-vectors");
        out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    return out;
}

LeadField load_header(const fs::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open " + header_path.string());
    nlohmann::json h;
    try {
        in >> h;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(header_path.string() + ": " + e.what());
    }

    try {
        if (h.value("format", std::string{}) != kLeadFieldFormat)
            throw ParseError(header_path.string() + ": not a lead-field header");
        const int n = h.at("n_electrodes").get<int>();
        const int m = h.at("n_sources").get<int>();
        const int dof = h.at("dof").get<int>();
        if (n < 1 || m < 1 || (dof != 1 && dof != 3)) throw ParseError("invalid declared shape");
        const Eigen::Index cols = static_cast<Eigen::Index>(dof) * m;

        auto ss = std::make_shared<SourceSpace>();
        ss->dof = dof;
        ss->head_radius = h.value("head_radius", 0.0);
        ss->grid_spacing = h.value("grid_spacing", 0.0);
        if (h.contains("source_positions")) {
            ss->positions = positions_from(h.at("source_positions"));
        } else {
            ss->positions.assign(static_cast<std::size_t>(m), Vec3::Zero());
        }
        if (static_cast<int>(ss->positions.size()) != m)
            throw ParseError("source position count does not match n_sources");
        if (h.contains("source_orientations")) {
            for (const auto& o : h.at("source_orientations")) {
                if (o.is_null() || o.is_string()) {
                    ss->orientations.emplace_back(std::nullopt);
                } else {
                    ss->orientations.emplace_back(Vec3(o.at(0).get<double>(), o.at(1).get<double>(),
                                                       o.at(2).get<double>()));
                }
            }
        } else {
            ss->orientations.assign(static_cast<std::size_t>(m),
                                    dof == 1 ? Orientation(Vec3::UnitZ()) : Orientation(std::nullopt));
        }
        if (static_cast<int>(ss->orientations.size()) != m)
            throw ParseError("source orientation count does not match n_sources");
        if (h.contains("source_adjacency")) {
            ss->adjacency = h.at("source_adjacency").get<Adjacency>();
        } else if (ss->grid_spacing > 0.0) {
            ss->adjacency = grid_adjacency(*ss, 1);
        }

        auto ea = std::make_shared<ElectrodeArray>();
        ea->count = n;
        ea->radius = h.value("electrode_radius", 0.0);
        if (h.contains("electrode_positions")) ea->positions = positions_from(h.at("electrode_positions"));
        if (h.contains("electrode_adjacency")) {
            ea->adjacency = h.at("electrode_adjacency").get<Adjacency>();
        } else if (ea->has_geometry()) {
            ea->adjacency = electrode_adjacency(ea->positions);
        }

        const fs::path mat_path = header_path.parent_path() / h.value("matrix_file", std::string(kLeadFieldMatrixName));
        std::ifstream bin(mat_path, std::ios::binary);
        if (!bin) throw IoError("cannot open " + mat_path.string());
        const auto expected = static_cast<std::uintmax_t>(n) * static_cast<std::uintmax_t>(cols) * 8u;
        const auto actual = fs::file_size(mat_path);
        if (actual != expected)
            throw ParseError(mat_path.string() + ": size " + std::to_string(actual) + " bytes, expected " +
                             std::to_string(expected) + " for " + std::to_string(n) + "x" + std::to_string(cols));

        LeadField lf;
        lf.gain.resize(n, cols);
        std::vector<std::uint64_t> raw(static_cast<std::size_t>(n * cols));
        bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
        if (!bin) throw IoError("short read from " + mat_path.string());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            std::uint64_t v = raw[i];
            if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
            std::memcpy(lf.gain.data() + i, &v, 8);
        }
        if (!lf.gain.allFinite()) throw DataError(mat_path.string() + ": non-finite gain entry");

        if (h.contains("column_weights")) {
            const auto w = h.at("column_weights").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != cols) throw ParseError("column_weights length mismatch");
            lf.column_weights = Eigen::Map<const Vector>(w.data(), cols);
        } else {
            lf.column_weights = Vector::Ones(cols);
        }
        lf.normalized = h.value("normalized", false);
        lf.sources = std::move(ss);
        lf.electrodes = std::move(ea);
        require_valid(validate(lf), "lead field " + header_path.string());
        return lf;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(header_path.string() + ": " + e.what());
    }
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void save_leadfield(const LeadField& lf, const fs::path& dir) {
    require_valid(validate(lf), "lead field");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const SourceSpace& ss = *lf.sources;
    const ElectrodeArray& ea = *lf.electrodes;
    nlohmann::json orient = nlohmann::json::array();
    for (const auto& o : ss.orientations) {
        if (o) {
            orient.push_back({o->x(), o->y(), o->z()});
        } else {
            orient.push_back(nullptr);
        }
    }
    nlohmann::json h = {
        {"format", kLeadFieldFormat},
        {"format_version", kLeadFieldFormatVersion},
        {"n_electrodes", lf.n_electrodes()},
        {"n_sources", lf.n_sources()},
        {"dof", lf.dof()},
        {"units", {{"position", "mm"}, {"gain", "uV/(nA*m)"}}},
        {"normalized", lf.normalized},
        {"column_weights", std::vector<double>(lf.column_weights.data(),
                                               lf.column_weights.data() + lf.column_weights.size())},
        {"head_radius", ss.head_radius},
        {"grid_spacing", ss.grid_spacing},
        {"source_positions", positions_json(ss.positions)},
        {"source_orientations", std::move(orient)},
        {"source_adjacency", ss.adjacency},
        {"electrode_radius", ea.radius},
        {"electrode_positions", positions_json(ea.positions)},
        {"electrode_adjacency", ea.adjacency},
        {"matrix_file", kLeadFieldMatrixName},
        {"matrix_layout", "column-major float64 little-endian"},
    };
    {
        std::ofstream out(dir / kLeadFieldHeaderName);
        if (!out) throw IoError("cannot write " + (dir / kLeadFieldHeaderName).string());
        out << h.dump(1) << '\n';
    }
    std::ofstream bin(dir / kLeadFieldMatrixName, std::ios::binary);
    if (!bin) throw IoError("cannot write " + (dir / kLeadFieldMatrixName).string());
    for (Eigen::Index i = 0; i < lf.gain.size(); ++i) {
        std::uint64_t v;
        std::memcpy(&v, lf.gain.data() + i, 8);
        if constexpr (std::endian::native == std::endian::big) v = byteswap64(v);
        bin.write(reinterpret_cast<const char*>(&v), 8);
    }
    if (!bin) throw IoError("write failed for " + (dir / kLeadFieldMatrixName).string());
}

Matrix read_csv_matrix(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            if (b == std::string::npos) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty cell");
            cell = cell.substr(b, e - b + 1);
            double v = 0.0;
            if (cell == "nan" || cell == "NaN" || cell == "NAN") {
                v = std::nan("");
            } else if (cell == "inf" || cell == "Inf") {
                v = INFINITY;
            } else if (cell == "-inf" || cell == "-Inf") {
                v = -INFINITY;
            } else {
                auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path.string() + ": empty matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_csv_matrix(const Matrix& m, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

LeadField load_leadfield(const fs::path& path, int csv_dof) {
    if (fs::is_directory(path)) return load_header(path / kLeadFieldHeaderName);
    if (path.extension() == ".csv") {
        Matrix g = read_csv_matrix(path);
        if (!g.allFinite()) throw DataError(path.string() + ": non-finite gain entry");
        if (csv_dof != 1 && csv_dof != 3) throw ConfigError("dof must be 1 or 3");
        if (g.cols() % csv_dof != 0) throw ParseError(path.string() + ": column count not divisible by dof");
        const int m = static_cast<int>(g.cols() / csv_dof);
        auto ss = std::make_shared<SourceSpace>();
        ss->dof = csv_dof;
        ss->positions.assign(static_cast<std::size_t>(m), Vec3::Zero());
        ss->orientations.assign(static_cast<std::size_t>(m),
                                csv_dof == 1 ? Orientation(Vec3::UnitZ()) : Orientation(std::nullopt));
        auto ea = std::make_shared<ElectrodeArray>();
        ea->count = static_cast<int>(g.rows());
        LeadField lf;
        lf.column_weights = Vector::Ones(g.cols());
        lf.gain = std::move(g);
        lf.sources = std::move(ss);
        lf.electrodes = std::move(ea);
        require_valid(validate(lf), "lead field " + path.string());
        return lf;
    }
    return load_header(path);
}

Measurements load_measurements(const fs::path& path, double fs_hz) {
    Measurements m;
    m.data = read_csv_matrix(path);
    if (!m.data.allFinite()) throw DataError(path.string() + ": non-finite measurement");
    m.fs = fs_hz;
    m.provenance = path.string();
    return m;
}

} // namespace sparseloc
