#include "sparseloc/simulate.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

namespace sparseloc {

int ErpSpec::n_samples() const { return static_cast<int>(std::lround(duration_ms * fs / 1000.0)); }

void to_json(nlohmann::json& j, const ErpSpec& e) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : e.peaks)
        peaks.push_back({{"latency_ms", p.latency_ms}, {"width_ms", p.width_ms}, {"amplitude", p.amplitude}});
    j = {{"peaks", std::move(peaks)}, {"duration_ms", e.duration_ms}, {"fs", e.fs}};
}

void from_json(const nlohmann::json& j, ErpSpec& e) {
    e = ErpSpec{};
    for (const auto& p : j.at("peaks"))
        e.peaks.push_back({p.at("latency_ms").get<double>(), p.at("width_ms").get<double>(),
                           p.at("amplitude").get<double>()});
    e.duration_ms = j.value("duration_ms", 1000.0);
    e.fs = j.value("fs", 1000.0);
    for (const auto& p : e.peaks) {
        if (!(p.width_ms > 0.0)) throw ConfigError("ERP peak width must be positive");
        if (p.latency_ms < 0.0 || p.latency_ms > e.duration_ms) throw ConfigError("ERP latency outside duration");
    }
    if (!(e.fs > 0.0) || !(e.duration_ms > 0.0)) throw ConfigError("ERP duration and fs must be positive");
}

Vector erp_waveform(const ErpSpec& spec) {
    const int t_len = spec.n_samples();
    Vector w = Vector::Zero(std::max(t_len, 0));
    const double fwhm_to_sigma = 1.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (const auto& p : spec.peaks) {
        const double sigma = p.width_ms * fwhm_to_sigma;
        for (int t = 0; t < t_len; ++t) {
            const double ms = 1000.0 * t / spec.fs;
            const double z = (ms - p.latency_ms) / sigma;
            w(t) += p.amplitude * std::exp(-0.5 * z * z);
        }
    }
    return w;
}

int TestCaseSpec::n_sources() const {
    int n = 0;
    for (const auto& b : bands) n += b.count;
    return n;
}

namespace {

nlohmann::json bound_json(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

double bound_from(const nlohmann::json& j, const char* key, double dflt) {
    if (!j.contains(key) || j.at(key).is_null()) return dflt;
    return j.at(key).get<double>();
}

} // namespace

void to_json(nlohmann::json& j, const TestCaseSpec& t) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& b : t.bands)
        bands.push_back({{"label", b.label},
                         {"count", b.count},
                         {"min_radius", b.min_radius},
                         {"max_radius", bound_json(b.max_radius)},
                         {"max_within_distance", bound_json(b.max_within_distance)}});
    j = {{"name", t.name}, {"bands", std::move(bands)}, {"min_pairwise_distance", t.min_pairwise_distance}};
}

void from_json(const nlohmann::json& j, TestCaseSpec& t) {
    if (j.contains("preset")) {
        t = test_case_preset(j.at("preset").get<std::string>());
        return;
    }
    const double inf = std::numeric_limits<double>::infinity();
    t = TestCaseSpec{};
    t.name = j.value("name", std::string("custom"));
    for (const auto& b : j.at("bands")) {
        DepthBand band;
        band.label = b.value("label", std::string{});
        band.count = b.value("count", 1);
        band.min_radius = bound_from(b, "min_radius", 0.0);
        band.max_radius = bound_from(b, "max_radius", inf);
        band.max_within_distance = bound_from(b, "max_within_distance", inf);
        if (band.count < 1) throw ConfigError("band count must be positive");
        t.bands.push_back(band);
    }
    t.min_pairwise_distance = j.value("min_pairwise_distance", 0.0);
    if (t.bands.empty()) throw ConfigError("test case needs at least one band");
}

TestCaseSpec test_case_preset(const std::string& name) {
    const double inf = std::numeric_limits<double>::infinity();
    TestCaseSpec t;
    t.name = name;
    if (name == "TC-I") {
        t.bands = {{"any", 1, 0.0, inf, inf}};
    } else if (name == "TC-II") {
        t.bands = {{"shallow", 3, 90.0, inf, inf}};
        t.min_pairwise_distance = 80.0;
    } else if (name == "TC-III") {
        t.bands = {{"deep", 3, 0.0, 60.0, inf}, {"intermediate", 1, 60.0, 80.0, inf}, {"shallow", 1, 70.0, inf, inf}};
        t.min_pairwise_distance = 70.0;
    } else if (name == "TC-IV") {
        t.bands = {{"deep", 4, 0.0, 60.0, 55.0}, {"intermediate", 1, 60.0, 70.0, inf}, {"shallow", 2, 70.0, inf, inf}};
    } else if (name == "CARSS-deep") {
        t.bands = {{"deep", 1, 0.0, 40.0, inf}};
    } else {
        throw ConfigError("unknown test case preset '" + name + "'");
    }
    return t;
}

bool satisfies(const TestCaseSpec& tc, const SourceSpace& ss, const IndexList& indices) {
    if (static_cast<int>(indices.size()) != tc.n_sources()) return false;
    std::size_t k = 0;
    for (const auto& band : tc.bands) {
        const std::size_t begin = k;
        for (int c = 0; c < band.count; ++c, ++k) {
            const double r = ss.positions[indices[k]].norm();
            if (r < band.min_radius || r > band.max_radius) return false;
            for (std::size_t q = begin; q < k; ++q)
                if ((ss.positions[indices[q]] - ss.positions[indices[k]]).norm() > band.max_within_distance)
                    return false;
        }
    }
    for (std::size_t a = 0; a < indices.size(); ++a)
        for (std::size_t b = a + 1; b < indices.size(); ++b) {
            if (indices[a] == indices[b]) return false;
            if ((ss.positions[indices[a]] - ss.positions[indices[b]]).norm() < tc.min_pairwise_distance)
                return false;
        }
    return true;
}

Scenario sample_scenario(const TestCaseSpec& tc, const SourceSpace& ss, const std::vector<ErpSpec>& erps,
                         const NoiseSpec& noise, std::uint64_t seed) {
    if (erps.empty()) throw ConfigError("at least one ERP specification is required");
    if (tc.bands.empty()) throw ConfigError("test case needs at least one band");

    std::vector<IndexList> eligible;
    for (const auto& band : tc.bands) {
        IndexList e;
        for (int j = 0; j < ss.size(); ++j) {
            const double r = ss.positions[j].norm();
            if (r >= band.min_radius && r <= band.max_radius) e.push_back(j);
        }
        if (static_cast<int>(e.size()) < band.count)
            throw ConfigError("constraints unsatisfiable: band '" + band.label + "' has too few sources");
        eligible.push_back(std::move(e));
    }

    CounterRng rng(derive_seed(seed, {0x5ce7a210}));
    IndexList picked;
    bool ok = false;
    for (long attempt = 0; attempt < kMaxRejections; ++attempt) {
        picked.clear();
        for (std::size_t b = 0; b < tc.bands.size(); ++b)
            for (int c = 0; c < tc.bands[b].count; ++c)
                picked.push_back(eligible[b][rng.below(eligible[b].size())]);
        if (satisfies(tc, ss, picked)) {
            ok = true;
            break;
        }
    }
    if (!ok) throw ConfigError("constraints unsatisfiable after " + std::to_string(kMaxRejections) + " rejections");

    Scenario sc;
    sc.active_indices = picked;
    sc.noise = noise;
    sc.seed = seed;
    sc.fs = erps.front().fs;
    const int t_len = erps.front().n_samples();
    sc.waveforms.resize(static_cast<Eigen::Index>(picked.size()), t_len);
    for (std::size_t i = 0; i < picked.size(); ++i) {
        const ErpSpec& e = erps[i % erps.size()];
        if (e.n_samples() != t_len || e.fs != sc.fs) throw ConfigError("ERP specifications disagree on length or fs");
        sc.waveforms.row(static_cast<Eigen::Index>(i)) = erp_waveform(e).transpose();
        if (ss.dof == 1) {
            sc.active_orientations.push_back(ss.orientations[picked[i]]);
        } else {
            Vec3 o(rng.normal(), rng.normal(), rng.normal());
            sc.active_orientations.emplace_back(o.normalized());
        }
    }
    return sc;
}

Matrix truth_matrix(const LeadField& lf, const Scenario& sc) {
    require_valid(validate(sc, lf.n_sources()), "scenario");
    const int dof = lf.dof();
    Matrix x = Matrix::Zero(lf.n_columns(), sc.n_samples());
    for (std::size_t i = 0; i < sc.active_indices.size(); ++i) {
        const int j = sc.active_indices[i];
        const auto w = sc.waveforms.row(static_cast<Eigen::Index>(i));
        const Orientation& o = sc.active_orientations[i];
        if (dof == 1) {
            if (!o) throw ConfigError("free orientation marker with a dof=1 lead field");
            const Orientation& fixed = lf.sources->orientations[j];
            const double proj = fixed ? o->dot(*fixed) : 1.0;
            x.row(j) += proj * w;
        } else {
            Vec3 dir;
            if (o) {
                dir = *o;
            } else {
                const Vec3& p = lf.sources->positions[j];
                dir = p.norm() > 0.0 ? Vec3(p.normalized()) : Vec3::UnitZ();
            }
            for (int c = 0; c < 3; ++c) x.row(3 * j + c) += dir(c) * w;
        }
    }
    return x;
}

Measurements simulate_measurements(const LeadField& lf, const Scenario& sc) {
    const Matrix x = truth_matrix(lf, sc);
    Measurements m;
    m.fs = sc.fs;
    m.baseline_samples = sc.baseline_samples;
    m.provenance = "simulated:seed=" + std::to_string(sc.seed);
    m.data = Matrix::Zero(lf.n_electrodes(), sc.n_samples());
    const int dof = lf.dof();
    for (int j : sc.active_indices)
        m.data.noalias() += lf.block(j) * x.middleRows(static_cast<Eigen::Index>(j) * dof, dof);

    switch (sc.noise.kind) {
    case NoiseKind::none: break;
    case NoiseKind::white:
    case NoiseKind::pink:
    case NoiseKind::brown:
        if (sc.noise.amplitude > 0.0)
            m.data += gen_noise(sc.noise.kind, sc.noise.amplitude, lf.n_electrodes(), sc.n_samples(), sc.fs,
                                derive_seed(sc.seed, {0x401e}));
        break;
    case NoiseKind::sensor_percent:
        m = add_sensor_noise(m, sc.noise.amplitude, derive_seed(sc.seed, {0x5e45}));
        break;
    }
    return m;
}

Matrix gen_noise(NoiseKind kind, double amplitude, int n_channels, int n_samples, double fs, std::uint64_t seed) {
    if (kind != NoiseKind::white && kind != NoiseKind::pink && kind != NoiseKind::brown)
        throw ConfigError("gen_noise supports white, pink and brown noise");
    if (!(amplitude > 0.0)) throw ConfigError("noise amplitude must be positive");
    if (n_channels < 0 || n_samples < 0) throw ConfigError("negative noise shape");

    Matrix out(n_channels, n_samples);
    const double exponent = kind == NoiseKind::white ? 0.0 : (kind == NoiseKind::pink ? 1.0 : 2.0);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    std::vector<double> series;

    for (int c = 0; c < n_channels; ++c) {
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
        series.assign(static_cast<std::size_t>(n_samples), 0.0);
        if (kind == NoiseKind::white) {
            for (auto& s : series) s = rng.normal();
        } else if (n_samples > 1) {
            // Hermitian spectrum with zero DC; power ~ f^-exponent.
            const int n = n_samples;
            spectrum.assign(static_cast<std::size_t>(n), {0.0, 0.0});
            for (int k = 1; k <= n / 2; ++k) {
                const double f = k * fs / n;
                const double gain = std::pow(f, -0.5 * exponent);
                const double re = rng.normal();
                const double im = rng.normal();
                if (2 * k == n) {
                    spectrum[static_cast<std::size_t>(k)] = {gain * re, 0.0};
                } else {
                    spectrum[static_cast<std::size_t>(k)] = {gain * re, gain * im};
                    spectrum[static_cast<std::size_t>(n - k)] = {gain * re, -gain * im};
                }
            }
            fft.inv(series, spectrum);
        }
        double peak = 0.0;
        for (double s : series) peak = std::max(peak, std::abs(s));
        const double scale = peak > 0.0 ? amplitude / peak : 0.0;
        for (int t = 0; t < n_samples; ++t) out(c, t) = scale * series[static_cast<std::size_t>(t)];
    }
    return out;
}

Measurements add_sensor_noise(const Measurements& y, double percent, std::uint64_t seed) {
    if (percent < 0.0) throw ConfigError("sensor noise percent must be non-negative");
    Measurements out = y;
    if (percent == 0.0 || y.data.size() == 0) return out;
    const double sd = percent / 100.0 * y.data.cwiseAbs().maxCoeff();
    for (Eigen::Index c = 0; c < y.data.rows(); ++c) {
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
        for (Eigen::Index t = 0; t < y.data.cols(); ++t) out.data(c, t) += sd * rng.normal();
    }
    return out;
}

} // namespace sparseloc
