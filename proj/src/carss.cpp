#include "sparseloc/carss.hpp"

#include "sparseloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sparseloc {

void to_json(nlohmann::json& j, const CarssOptions& o) {
    j = {{"tau", o.tau}, {"sample_stride", o.sample_stride}, {"peak_floor", o.peak_floor}};
}

void from_json(const nlohmann::json& j, CarssOptions& o) {
    for (const auto& [key, val] : j.items()) {
        if (key == "tau") o.tau = val.get<double>();
        else if (key == "sample_stride") o.sample_stride = val.get<int>();
        else if (key == "peak_floor") o.peak_floor = val.get<double>();
        else throw ConfigError("unknown CARSS option '" + key + "'");
    }
    if (!(o.tau >= 0.0 && o.tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
    if (o.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
    if (!(o.peak_floor >= 0.0 && o.peak_floor < 1.0)) throw ConfigError("peak_floor must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ReductionReport& r) {
    j = {{"kept", r.kept},
         {"certainty", r.certainty},
         {"sampled_times", r.sampled_times},
         {"peaks", r.peaks},
         {"n_sources", r.n_sources},
         {"ratio", r.ratio()},
         {"fallback_used", r.fallback_used}};
}

SignatureTable build_signatures(const LeadField& lf, const Adjacency& adj) {
    if (static_cast<int>(adj.size()) != lf.n_electrodes() || lf.n_electrodes() == 0)
        throw ConfigError("CARSS needs an electrode adjacency");
    SignatureTable table(lf.n_columns());
    for (int c = 0; c < lf.n_columns(); ++c) {
        PeakSignature& s = table[c];
        lf.gain.col(c).cwiseAbs().maxCoeff(&s.peak);
        s.electrodes.push_back(s.peak);
        IndexList nb = adj[s.peak];
        std::sort(nb.begin(), nb.end());
        s.electrodes.insert(s.electrodes.end(), nb.begin(), nb.end());
        s.shape.resize(static_cast<Eigen::Index>(s.electrodes.size()));
        for (std::size_t e = 0; e < s.electrodes.size(); ++e) s.shape(static_cast<Eigen::Index>(e)) = lf.gain(s.electrodes[e], c);
        const double n = s.shape.norm();
        if (n > 0.0) s.shape /= n;
    }
    return table;
}

IndexList detect_scalp_peaks(const Vector& y_t, const Adjacency& adj, double floor_fraction) {
    if (static_cast<Eigen::Index>(adj.size()) != y_t.size()) throw ConfigError("electrode adjacency does not match topography");
    IndexList peaks;
    if (y_t.size() == 0) return peaks;
    const double top = y_t.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) return peaks;
    for (Eigen::Index e = 0; e < y_t.size(); ++e) {
        const double v = std::abs(y_t(e));
        if (!(v > floor_fraction * top)) continue;
        bool strict = true;
        for (int nb : adj[e])
            if (std::abs(y_t(nb)) >= v) {
                strict = false;
                break;
            }
        if (strict) peaks.push_back(static_cast<int>(e));
    }
    return peaks;
}

namespace {

std::vector<char> near_peaks(const IndexList& peaks, const Adjacency& adj) {
    std::vector<char> near(adj.size(), 0);
    for (int p : peaks) {
        near[p] = 1;
        for (int nb : adj[p]) near[nb] = 1;
    }
    return near;
}

double shape_cosine(const PeakSignature& sig, const Vector& y_t) {
    double dot = 0.0, nn = 0.0;
    for (std::size_t e = 0; e < sig.electrodes.size(); ++e) {
        const double v = y_t(sig.electrodes[e]);
        dot += sig.shape(static_cast<Eigen::Index>(e)) * v;
        nn += v * v;
    }
    if (!(nn > 0.0)) return 0.0;
    return std::min(1.0, std::abs(dot) / std::sqrt(nn));
}

} // namespace

double certainty(const PeakSignature& sig, const Vector& y_t, const IndexList& detected, const Adjacency& adj) {
    const std::vector<char> near = near_peaks(detected, adj);
    if (sig.peak < 0 || sig.peak >= static_cast<int>(near.size()) || !near[sig.peak]) return 0.0;
    return shape_cosine(sig, y_t);
}

ReductionReport reduce_solution_space(const LeadField& lf, const SignatureTable& sigs, const Matrix& y,
                                      const CarssOptions& opts) {
    if (!(opts.tau >= 0.0 && opts.tau <= 1.0)) throw ConfigError("tau must be in [0, 1]");
    if (opts.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
    if (static_cast<int>(sigs.size()) != lf.n_columns()) throw ConfigError("signature table does not match the lead field");
    if (y.rows() != lf.n_electrodes()) throw ConfigError("measurement rows do not match electrode count");
    if (!y.allFinite()) throw DataError("non-finite measurements");
    if (!lf.electrodes) throw ConfigError("CARSS needs electrode geometry");
    const Adjacency& adj = lf.electrodes->adjacency;

    const int m = lf.n_sources();
    const int dof = lf.dof();
    ReductionReport rep;
    rep.n_sources = m;
    std::vector<double> cert(m, 0.0);

    for (Eigen::Index t = 0; t < y.cols(); t += opts.sample_stride) {
        const Vector yt = y.col(t);
        IndexList peaks = detect_scalp_peaks(yt, adj, opts.peak_floor);
        const std::vector<char> near = near_peaks(peaks, adj);
        rep.sampled_times.push_back(static_cast<int>(t));
        rep.peaks.push_back(std::move(peaks));
        for (int j = 0; j < m; ++j)
            for (int c = 0; c < dof; ++c) {
                const PeakSignature& s = sigs[static_cast<std::size_t>(j) * dof + c];
                if (near[s.peak]) cert[j] = std::max(cert[j], shape_cosine(s, yt));
            }
    }

    for (int j = 0; j < m; ++j)
        if (cert[j] >= opts.tau) rep.kept.push_back(j);

    const int floor = std::min(lf.n_electrodes(), m);
    if (static_cast<int>(rep.kept.size()) < floor) {
        rep.fallback_used = true;
        IndexList order(m);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cert[a] > cert[b]; });
        order.resize(floor);
        std::sort(order.begin(), order.end());
        rep.kept = std::move(order);
    }
    for (int j : rep.kept) rep.certainty.push_back(cert[j]);
    return rep;
}

SourceEstimate solve_reduced(const SolverFn& solver, const LeadField& lf, const Matrix& y, const ReductionReport& report) {
    if (report.n_sources != lf.n_sources()) throw ConfigError("reduction report does not match the lead field");
    const LeadField sub = lf.restrict_to(report.kept);
    SourceEstimate inner = solver(sub, y);

    const int dof = lf.dof();
    SourceEstimate out = inner;
    out.amplitudes = Matrix::Zero(lf.n_columns(), inner.amplitudes.cols());
    for (std::size_t k = 0; k < report.kept.size(); ++k)
        out.amplitudes.middleRows(static_cast<Eigen::Index>(report.kept[k]) * dof, dof) =
            inner.amplitudes.middleRows(static_cast<Eigen::Index>(k) * dof, dof);
    if (!inner.extras.gamma.empty()) {
        out.extras.gamma.assign(lf.n_sources(), 0.0);
        for (std::size_t k = 0; k < report.kept.size() && k < inner.extras.gamma.size(); ++k)
            out.extras.gamma[report.kept[k]] = inner.extras.gamma[k];
    }
    for (int& f : out.extras.found_indices) f = report.kept[f];
    out.extras.reduced_indices = report.kept;
    return out;
}

} // namespace sparseloc
