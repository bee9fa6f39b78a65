#include "sparseloc/metrics.hpp"

#include "sparseloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <tuple>

namespace sparseloc {

void to_json(nlohmann::json& j, const EvaluationConfig& c) {
    j = {{"neighborhood_levels", c.neighborhood_levels}, {"peak_floor_fraction", c.peak_floor_fraction}};
    if (c.time_window) j["time_window"] = {c.time_window->first, c.time_window->second};
    else j["time_window"] = nullptr;
}

void from_json(const nlohmann::json& j, EvaluationConfig& c) {
    for (const auto& [key, val] : j.items()) {
        if (key == "neighborhood_levels") c.neighborhood_levels = val.get<int>();
        else if (key == "peak_floor_fraction") c.peak_floor_fraction = val.get<double>();
        else if (key == "time_window") {
            if (val.is_null()) c.time_window.reset();
            else c.time_window = std::make_pair(val.at(0).get<int>(), val.at(1).get<int>());
        } else throw ConfigError("unknown evaluation option '" + key + "'");
    }
    if (c.neighborhood_levels < 1) throw ConfigError("neighborhood_levels must be >= 1");
    if (!(c.peak_floor_fraction >= 0.0 && c.peak_floor_fraction < 1.0))
        throw ConfigError("peak_floor_fraction must be in [0, 1)");
}

Vector collapse_amplitude(const Matrix& x, int dof, std::optional<std::pair<int, int>> window) {
    if (dof < 1 || x.rows() % dof != 0) throw ConfigError("row count is not a multiple of dof");
    int b = 0, e = static_cast<int>(x.cols());
    if (window) std::tie(b, e) = *window;
    if (b < 0 || e > x.cols() || b >= e) throw ConfigError("empty or out-of-range time window");

    const Eigen::Index m = x.rows() / dof;
    Vector out(m);
    for (Eigen::Index j = 0; j < m; ++j)
        out(j) = std::sqrt(x.block(j * dof, b, dof, e - b).squaredNorm() / (e - b));
    return out;
}

IndexList local_peaks(const Vector& map, const Adjacency& level1, double floor_fraction) {
    if (static_cast<Eigen::Index>(level1.size()) != map.size()) throw ConfigError("adjacency does not match the map");
    IndexList peaks;
    if (map.size() == 0) return peaks;
    const double top = map.maxCoeff();
    if (!(top > 0.0)) return peaks;
    for (Eigen::Index i = 0; i < map.size(); ++i) {
        const double v = map(i);
        if (!(v > 0.0) || v < floor_fraction * top) continue;
        bool strict = true;
        for (int nb : level1[i])
            if (map(nb) >= v) {
                strict = false;
                break;
            }
        if (strict) peaks.push_back(static_cast<int>(i));
    }
    return peaks;
}

std::vector<std::pair<int, int>> neighborhood_ball(const Adjacency& level1, int center, int levels) {
    std::vector<std::pair<int, int>> out{{center, 0}};
    std::vector<int> depth(level1.size(), -1);
    depth[center] = 0;
    std::deque<int> queue{center};
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        if (depth[u] == levels) continue;
        for (int v : level1[u]) {
            if (depth[v] >= 0) continue;
            depth[v] = depth[u] + 1;
            out.emplace_back(v, depth[v]);
            queue.push_back(v);
        }
    }
    return out;
}

namespace {

void check_indices(const IndexList& idx, std::size_t m) {
    for (int i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= m) throw ConfigError("source index out of range");
}

} // namespace

SuccessRate success_rate(const IndexList& truth, const IndexList& peaks, const Adjacency& level1, int levels) {
    if (levels < 1) throw ConfigError("levels must be >= 1");
    check_indices(truth, level1.size());
    check_indices(peaks, level1.size());
    std::vector<char> is_peak(level1.size(), 0);
    for (int p : peaks) is_peak[p] = 1;

    SuccessRate sr;
    for (int t : truth) {
        int hit = 0;
        for (auto [i, d] : neighborhood_ball(level1, t, levels))
            if (is_peak[i]) {
                hit = 1;
                break;
            }
        sr.hits.push_back(hit);
    }
    if (!truth.empty())
        sr.mean = static_cast<double>(std::count(sr.hits.begin(), sr.hits.end(), 1)) / static_cast<double>(truth.size());
    return sr;
}

HitFalse hit_false_rates(const IndexList& truth, const IndexList& peaks, const Adjacency& level1, int levels) {
    if (levels < 1) throw ConfigError("levels must be >= 1");
    check_indices(truth, level1.size());
    check_indices(peaks, level1.size());

    std::vector<int> peak_slot(level1.size(), -1);
    for (std::size_t p = 0; p < peaks.size(); ++p) peak_slot[peaks[p]] = static_cast<int>(p);

    // (hops, truth position, peak index)
    std::vector<std::tuple<int, int, int>> pairs;
    for (std::size_t t = 0; t < truth.size(); ++t)
        for (auto [i, d] : neighborhood_ball(level1, truth[t], levels))
            if (peak_slot[i] >= 0) pairs.emplace_back(d, static_cast<int>(t), i);
    std::sort(pairs.begin(), pairs.end());

    std::vector<char> truth_used(truth.size(), 0), peak_used(level1.size(), 0);
    int matched = 0;
    for (auto [d, t, p] : pairs) {
        if (truth_used[t] || peak_used[p]) continue;
        truth_used[t] = peak_used[p] = 1;
        ++matched;
    }
    HitFalse hf;
    if (!truth.empty()) hf.hr = static_cast<double>(matched) / static_cast<double>(truth.size());
    const double n_peaks = static_cast<double>(peaks.size());
    hf.fr = (n_peaks - matched) / std::max(1.0, n_peaks);
    return hf;
}

double a_prime(double hr, double fr) {
    if (!(hr >= 0.0 && hr <= 1.0 && fr >= 0.0 && fr <= 1.0)) throw ConfigError("rates must lie in [0, 1]");
    return ((hr - fr) + 1.0) / 2.0;
}

namespace {

double nearest(const Vec3& p, const std::vector<Vec3>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : set) best = std::min(best, (p - q).norm());
    return best;
}

} // namespace

double dle(const std::vector<Vec3>& truth, const std::vector<Vec3>& estimate) {
    if (truth.empty() || estimate.empty()) throw DataError("undefined DLE");
    double a = 0.0, b = 0.0;
    for (const Vec3& t : truth) a += nearest(t, estimate);
    for (const Vec3& e : estimate) b += nearest(e, truth);
    return a / (2.0 * static_cast<double>(truth.size())) + b / (2.0 * static_cast<double>(estimate.size()));
}

double spatial_dispersion(const Vector& map, const std::vector<Vec3>& truth, const std::vector<Vec3>& positions) {
    if (truth.empty()) throw DataError("undefined SD");
    if (static_cast<std::size_t>(map.size()) != positions.size()) throw ConfigError("map does not match source positions");
    double num = 0.0, den = 0.0;
    for (Eigen::Index q = 0; q < map.size(); ++q) {
        const double s2 = map(q) * map(q);
        if (s2 == 0.0) continue;
        const double d = nearest(positions[q], truth);
        num += d * d * s2;
        den += s2;
    }
    if (!(den > 0.0)) throw DataError("undefined SD");
    return std::sqrt(num / den);
}

TrialMetrics evaluate(const SourceSpace& ss, const IndexList& truth, const SourceEstimate& est,
                      const EvaluationConfig& cfg) {
    if (est.amplitudes.rows() != static_cast<Eigen::Index>(ss.size()) * ss.dof)
        throw ConfigError("estimate does not match the source space");
    if (!est.amplitudes.allFinite()) throw DataError("non-finite estimate");

    TrialMetrics m;
    const Vector map = collapse_amplitude(est.amplitudes, ss.dof, cfg.time_window);
    m.peaks = local_peaks(map, ss.adjacency, cfg.peak_floor_fraction);
    const SuccessRate sr = success_rate(truth, m.peaks, ss.adjacency, cfg.neighborhood_levels);
    m.sr = sr.hits;
    m.sr_mean = sr.mean;
    const HitFalse hf = hit_false_rates(truth, m.peaks, ss.adjacency, cfg.neighborhood_levels);
    m.hr = hf.hr;
    m.fr = hf.fr;
    m.a_prime = a_prime(hf.hr, hf.fr);

    std::vector<Vec3> tpos;
    for (int t : truth) tpos.push_back(ss.positions[t]);
    if (!m.peaks.empty() && !tpos.empty()) {
        std::vector<Vec3> epos;
        for (int p : m.peaks) epos.push_back(ss.positions[p]);
        m.dle_mm = dle(tpos, epos);
    }
    if (!tpos.empty() && map.maxCoeff() > 0.0) m.sd_mm = spatial_dispersion(map, tpos, ss.positions);
    return m;
}

} // namespace sparseloc
