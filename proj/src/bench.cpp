#include "sparseloc/bench.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/leadfield_io.hpp"
#include "sparseloc/registry.hpp"
#include "sparseloc/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>
#include <tuple>

namespace sparseloc {

using json = nlohmann::json;

std::vector<ErpSpec> default_erps() {
    auto spec = [](std::vector<ErpPeak> peaks) {
        ErpSpec e;
        e.peaks = std::move(peaks);
        e.duration_ms = 1000.0;
        e.fs = 50.0;
        return e;
    };
    return {
        spec({{500, 200, 1.0}, {300, 300, 1.2}, {200, 100, 0.6}}),
        spec({{500, 200, 1.0}, {400, 100, 1.2}, {300, 200, 0.8}}),
        spec({{100, 200, -1.5}, {400, 100, -0.5}, {500, 200, 1.0}, {600, 400, -0.5}}),
    };
}

CampaignConfig default_campaign_config() {
    CampaignConfig c;
    SpaceConfig s;
    s.name = "sphere";
    s.sphere.head_radius = 110.0;
    s.sphere.grid_spacing = 12.5;
    c.spaces = {s};
    c.solvers = {{"sloreta", "sloreta", json::object()}};
    c.test_cases = {test_case_preset("TC-I")};
    c.noise = {NoiseSpec{}};
    c.erps = default_erps();
    return c;
}

namespace {

std::string carss_to_string(CarssMode m) {
    switch (m) {
    case CarssMode::off: return "off";
    case CarssMode::on: return "on";
    case CarssMode::both: return "both";
    }
    return "off";
}

CarssMode carss_from_string(const std::string& s) {
    if (s == "off") return CarssMode::off;
    if (s == "on") return CarssMode::on;
    if (s == "both") return CarssMode::both;
    throw ConfigError("carss must be off, on or both");
}

json test_case_json(const TestCaseSpec& t) {
    json j;
    to_json(j, t);
    return j;
}

} // namespace

void to_json(json& j, const CampaignConfig& c) {
    json spaces = json::array();
    for (const auto& s : c.spaces) {
        json sj = {{"name", s.name}, {"dof", s.dof}};
        if (s.leadfield_path.empty()) sj["sphere"] = s.sphere;
        else sj["leadfield"] = s.leadfield_path;
        spaces.push_back(std::move(sj));
    }
    json solvers = json::array();
    for (const auto& s : c.solvers) solvers.push_back({{"name", s.name}, {"label", s.label}, {"params", s.params}});
    json cases = json::array();
    for (const auto& t : c.test_cases) cases.push_back(test_case_json(t));
    json erps = json::array();
    for (const auto& e : c.erps) erps.push_back(e);

    j = {{"spaces", std::move(spaces)},
         {"solvers", std::move(solvers)},
         {"test_cases", std::move(cases)},
         {"noise", c.noise},
         {"erps", std::move(erps)},
         {"trials", c.trials},
         {"carss", carss_to_string(c.carss)},
         {"carss_options", c.carss_options},
         {"evaluation", c.evaluation},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"workers", c.workers},
         {"record_wall_time", c.record_wall_time},
         {"unit_peak_sources", c.unit_peak_sources}};
}

void from_json(const json& j, CampaignConfig& c) {
    if (!j.is_object()) throw ConfigError("campaign config must be a JSON object");
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "spaces") {
                c.spaces.clear();
                for (const auto& sj : val) {
                    SpaceConfig s;
                    for (const auto& [k, v] : sj.items()) {
                        if (k == "name") s.name = v.get<std::string>();
                        else if (k == "dof") s.dof = v.get<int>();
                        else if (k == "sphere") s.sphere = v.get<SphereSpec>();
                        else if (k == "leadfield") s.leadfield_path = v.get<std::string>();
                        else throw ConfigError("unknown space key '" + k + "'");
                    }
                    c.spaces.push_back(std::move(s));
                }
            } else if (key == "solvers") {
                c.solvers.clear();
                for (const auto& sj : val) {
                    SolverEntry s;
                    if (sj.is_string()) {
                        s.name = sj.get<std::string>();
                    } else {
                        for (const auto& [k, v] : sj.items()) {
                            if (k == "name") s.name = v.get<std::string>();
                            else if (k == "label") s.label = v.get<std::string>();
                            else if (k == "params") s.params = v;
                            else throw ConfigError("unknown solver key '" + k + "'");
                        }
                    }
                    if (s.label.empty()) s.label = s.name;
                    c.solvers.push_back(std::move(s));
                }
            } else if (key == "test_cases") {
                c.test_cases.clear();
                for (const auto& tj : val)
                    c.test_cases.push_back(tj.is_string() ? test_case_preset(tj.get<std::string>()) : tj.get<TestCaseSpec>());
            } else if (key == "noise") {
                c.noise = val.get<std::vector<NoiseSpec>>();
            } else if (key == "erps") {
                c.erps = val.get<std::vector<ErpSpec>>();
            } else if (key == "trials") {
                c.trials = val.get<int>();
            } else if (key == "carss") {
                c.carss = carss_from_string(val.get<std::string>());
            } else if (key == "carss_options") {
                c.carss_options = val.get<CarssOptions>();
            } else if (key == "evaluation") {
                c.evaluation = val.get<EvaluationConfig>();
            } else if (key == "seed") {
                c.seed = val.get<std::uint64_t>();
            } else if (key == "output_dir") {
                c.output_dir = val.get<std::string>();
            } else if (key == "workers") {
                c.workers = val.get<int>();
            } else if (key == "record_wall_time") {
                c.record_wall_time = val.get<bool>();
            } else if (key == "unit_peak_sources") {
                c.unit_peak_sources = val.get<bool>();
            } else {
                throw ConfigError("unknown campaign key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid campaign config: ") + e.what());
    }
}

void validate(const CampaignConfig& c) {
    if (c.trials < 1) throw ConfigError("trials must be >= 1");
    if (c.solvers.empty()) throw ConfigError("at least one solver is required");
    if (c.test_cases.empty()) throw ConfigError("at least one test case is required");
    if (c.spaces.empty()) throw ConfigError("at least one source space is required");
    if (c.noise.empty()) throw ConfigError("at least one noise level is required");
    if (c.erps.empty()) throw ConfigError("at least one ERP specification is required");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    for (const auto& s : c.spaces)
        if (s.dof != 1 && s.dof != 3) throw ConfigError("space dof must be 1 or 3");
    for (const auto& n : c.noise)
        if (n.kind != NoiseKind::none && !(n.amplitude > 0.0)) throw ConfigError("noise amplitude must be positive");
    std::set<std::string> labels;
    for (const auto& s : c.solvers) {
        make_solver(s.name, s.params);
        if (!labels.insert(s.label.empty() ? s.name : s.label).second)
            throw ConfigError("duplicate solver label '" + s.label + "'");
    }
}

PreparedSpace prepare_space(const SpaceConfig& sc, bool with_signatures) {
    PreparedSpace ps;
    ps.name = sc.name;
    LeadField raw = sc.leadfield_path.empty() ? generate_sphere_leadfield(sc.sphere, sc.dof) : load_leadfield(sc.leadfield_path);
    if (raw.dof() != sc.dof) throw ConfigError("lead field dof does not match space '" + sc.name + "'");
    if (raw.sources->adjacency.empty()) throw ConfigError("space '" + sc.name + "' has no source adjacency");
    ps.lf = normalize_columns(raw);
    if (with_signatures) {
        if (!ps.lf.electrodes || ps.lf.electrodes->adjacency.empty())
            throw ConfigError("CARSS needs electrode adjacency in space '" + sc.name + "'");
        ps.signatures = build_signatures(ps.lf, ps.lf.electrodes->adjacency);
    }
    return ps;
}

std::uint64_t scenario_seed(const CampaignConfig& cfg, int space, int test_case, int trial) {
    return derive_seed(cfg.seed, {static_cast<std::uint64_t>(space), static_cast<std::uint64_t>(test_case),
                                  static_cast<std::uint64_t>(trial)});
}

std::uint64_t noise_seed(std::uint64_t scenario, int noise) {
    return derive_seed(scenario, {0x6e6f697365ULL, static_cast<std::uint64_t>(noise)});
}

void scale_to_unit_peak(const LeadField& lf, Scenario& sc) {
    const Matrix x = truth_matrix(lf, sc);
    const int dof = lf.dof();
    for (std::size_t i = 0; i < sc.active_indices.size(); ++i) {
        const int j = sc.active_indices[i];
        const Matrix topo = lf.block(j) * x.middleRows(static_cast<Eigen::Index>(j) * dof, dof);
        const double wpeak = sc.waveforms.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
        const double tpeak = topo.cwiseAbs().maxCoeff();
        if (wpeak > 0.0 && tpeak > 0.0) sc.waveforms.row(static_cast<Eigen::Index>(i)) *= wpeak / tpeak;
    }
}

std::vector<TrialResult> run_trial_group(const CampaignConfig& cfg, const PreparedSpace& ps, int space, int test_case,
                                         int noise, int trial, const std::vector<Cell>& cells) {
    const std::uint64_t seed = scenario_seed(cfg, space, test_case, trial);
    std::vector<TrialResult> out;
    for (const Cell& cell : cells) {
        TrialResult r;
        r.test_case = cfg.test_cases[test_case].name;
        r.noise = noise_label(cfg.noise[noise]);
        r.space = ps.name;
        r.carss = cell.carss;
        const SolverEntry& se = cfg.solvers[cell.solver];
        r.solver = se.label.empty() ? se.name : se.label;
        r.trial = trial;
        r.seed = seed;
        out.push_back(std::move(r));
    }

    Measurements meas;
    try {
        Scenario sc = sample_scenario(cfg.test_cases[test_case], *ps.lf.sources, cfg.erps, cfg.noise[noise], seed);
        sc.seed = noise_seed(seed, noise);
        if (cfg.unit_peak_sources) scale_to_unit_peak(ps.lf, sc);
        meas = simulate_measurements(ps.lf, sc);
        for (auto& r : out) r.truth = sc.active_indices;
    } catch (const std::exception& e) {
        for (auto& r : out) {
            r.failed = true;
            r.error = e.what();
        }
        return out;
    }

    std::optional<ReductionReport> reduction;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        TrialResult& r = out[i];
        const auto start = std::chrono::steady_clock::now();
        try {
            const SolverEntry& se = cfg.solvers[cells[i].solver];
            const SolverFn solver = make_solver(se.name, se.params, meas.baseline_samples);
            SourceEstimate est;
            if (cells[i].carss) {
                if (!reduction) reduction = reduce_solution_space(ps.lf, ps.signatures, meas.data, cfg.carss_options);
                est = solve_reduced(solver, ps.lf, meas.data, *reduction);
                ReductionSummary rs;
                rs.kept = static_cast<int>(reduction->kept.size());
                rs.ratio = reduction->ratio();
                rs.fallback_used = reduction->fallback_used;
                for (int t : r.truth)
                    if (std::binary_search(reduction->kept.begin(), reduction->kept.end(), t)) ++rs.truth_retained;
                r.reduction = rs;
            } else {
                est = solver(ps.lf, meas.data);
            }
            r.metrics = evaluate(*ps.lf.sources, r.truth, est, cfg.evaluation);
        } catch (const std::exception& e) {
            r.failed = true;
            r.error = e.what();
        }
        if (cfg.record_wall_time)
            r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return out;
}

TrialResult run_trial(const CampaignConfig& cfg, const PreparedSpace& ps, const Cell& cell, int trial) {
    return run_trial_group(cfg, ps, cell.space, cell.test_case, cell.noise, trial, {cell}).front();
}

Stat mean_ci(const std::vector<double>& v) {
    Stat s;
    s.n = static_cast<int>(v.size());
    if (v.empty()) {
        s.mean = s.lo = s.hi = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / s.n;
    s.lo = s.hi = s.mean;
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / (s.n - 1));
    const boost::math::students_t dist(s.n - 1);
    const double half = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(s.n));
    s.lo = s.mean - half;
    s.hi = s.mean + half;
    return s;
}

std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials) {
    using Key = std::tuple<std::string, std::string, std::string, bool, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const TrialResult*>> groups;
    for (const auto& t : trials) {
        Key k{t.test_case, t.noise, t.space, t.carss, t.solver};
        auto [it, inserted] = groups.try_emplace(k);
        if (inserted) order.push_back(k);
        it->second.push_back(&t);
    }

    std::vector<Aggregate> out;
    for (const Key& k : order) {
        const auto& rows = groups[k];
        Aggregate a;
        std::tie(a.test_case, a.noise, a.space, a.carss, a.solver) = k;
        a.trials = static_cast<int>(rows.size());
        std::vector<double> ap, sr, dl, sd;
        for (const TrialResult* r : rows) {
            if (r->failed) {
                ++a.failed;
                continue;
            }
            ap.push_back(r->metrics.a_prime);
            sr.push_back(r->metrics.sr_mean);
            if (r->metrics.dle_mm) dl.push_back(*r->metrics.dle_mm);
            if (r->metrics.sd_mm) sd.push_back(*r->metrics.sd_mm);
        }
        a.a_prime = mean_ci(ap);
        a.sr_mean = mean_ci(sr);
        a.dle_mm = mean_ci(dl);
        a.sd_mm = mean_ci(sd);

        if (a.carss) {
            const Key off{a.test_case, a.noise, a.space, false, a.solver};
            if (auto it = groups.find(off); it != groups.end()) {
                std::map<int, const TrialResult*> base;
                for (const TrialResult* r : it->second) base[r->trial] = r;
                std::vector<double> diff;
                for (const TrialResult* r : rows) {
                    auto b = base.find(r->trial);
                    if (r->failed || b == base.end() || b->second->failed) continue;
                    diff.push_back(r->metrics.a_prime - b->second->metrics.a_prime);
                }
                a.paired_diff = mean_ci(diff);
            }
        }
        out.push_back(std::move(a));
    }
    return out;
}

CampaignResult run_campaign(const CampaignConfig& cfg) {
    validate(cfg);
    if (!cfg.output_dir.empty()) ensure_writable_dir(cfg.output_dir);

    const bool want_carss = cfg.carss != CarssMode::off;
    std::vector<PreparedSpace> spaces;
    for (const auto& s : cfg.spaces) spaces.push_back(prepare_space(s, want_carss));

    std::vector<bool> carss_flags;
    if (cfg.carss != CarssMode::on) carss_flags.push_back(false);
    if (cfg.carss != CarssMode::off) carss_flags.push_back(true);

    struct Unit {
        int space, test_case, noise, trial;
    };
    std::vector<Unit> units;
    for (int s = 0; s < static_cast<int>(cfg.spaces.size()); ++s)
        for (int c = 0; c < static_cast<int>(cfg.test_cases.size()); ++c)
            for (int n = 0; n < static_cast<int>(cfg.noise.size()); ++n)
                for (int t = 0; t < cfg.trials; ++t) units.push_back({s, c, n, t});

    std::vector<std::vector<TrialResult>> results(units.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t u = next++; u < units.size(); u = next++) {
            const Unit& un = units[u];
            std::vector<Cell> cells;
            for (bool flag : carss_flags)
                for (int so = 0; so < static_cast<int>(cfg.solvers.size()); ++so)
                    cells.push_back({un.space, un.test_case, un.noise, so, flag});
            results[u] = run_trial_group(cfg, spaces[un.space], un.space, un.test_case, un.noise, un.trial, cells);
        }
    };
    const int n_threads = std::min<int>(cfg.workers, static_cast<int>(units.size()));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    // Rows ordered by (test case, noise, space, carss, solver, trial) in config order.
    struct Row {
        std::tuple<int, int, int, int, int, int> key;
        TrialResult* r;
    };
    std::vector<Row> rows;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const Unit& un = units[u];
        std::size_t i = 0;
        for (bool flag : carss_flags)
            for (int so = 0; so < static_cast<int>(cfg.solvers.size()); ++so, ++i)
                rows.push_back({{un.test_case, un.noise, un.space, flag ? 1 : 0, so, un.trial}, &results[u][i]});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });

    CampaignResult out;
    out.config = cfg;
    out.config.erase("workers");
    out.config.erase("output_dir");
    for (const Row& row : rows) out.trials.push_back(std::move(*row.r));
    out.aggregates = aggregate(out.trials);
    if (!cfg.output_dir.empty()) write_all_reports(out, cfg.output_dir);
    return out;
}

} // namespace sparseloc
