// sparseloc command-line front end.
//
//   sparseloc leadfield gen  --spec sphere.json --out lf/
//   sparseloc leadfield info lf/
//   sparseloc simulate --leadfield lf/ --config scenario.json --seed 7 --out sim/
//   sparseloc solve    --solver mxne --leadfield lf/ --measurements y.csv --alpha 0.1
//   sparseloc bench    --config campaign.json --workers 4 --out results/
//   sparseloc report   --input results/campaign.json --format md --out results/

#include "sparseloc/bench.hpp"
#include "sparseloc/errors.hpp"
#include "sparseloc/headmodel.hpp"
#include "sparseloc/leadfield_io.hpp"
#include "sparseloc/registry.hpp"
#include "sparseloc/simulate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sparseloc;

namespace {

constexpr const char* kVersion = "1.0.0";

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

// key=value with a dotted key; the value is parsed as JSON when possible, else taken as a string.
void apply_override(json& doc, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw UsageError("empty path segment in '" + key + "'");
        const bool index = node->is_array() && part.find_first_not_of("0123456789") == std::string::npos;
        if (dot == std::string::npos) {
            if (index) node->at(std::stoul(part)) = value;
            else (*node)[part] = value;
            return;
        }
        node = index ? &node->at(std::stoul(part)) : &(*node)[part];
        start = dot + 1;
    }
}

json with_overrides(json doc, const std::vector<std::string>& sets) {
    for (const auto& s : sets) apply_override(doc, s);
    return doc;
}

void print_estimate(const SourceEstimate& est, const std::string& out) {
    json j = est;
    const std::string text = j.dump(1) + "\n";
    if (out.empty()) std::cout << text;
    else write_file(out, text);
}

int run(int argc, char** argv) {
    CLI::App app{"Sparse EEG source localization: lead fields, simulation, solvers and benchmarks"};
    app.set_version_flag("--version",
                         std::string("sparseloc ") + kVersion + " (leadfield format " + std::to_string(kLeadFieldFormatVersion) +
                             ", campaign format 1)");
    app.require_subcommand(1);

    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string config, out;
    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) sub->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--set", sets, "Override a config key: dotted.path=value (repeatable)");
        sub->add_option("--seed", seed, "Random seed; all randomness derives from it");
        sub->add_option("--out", out, "Output file or directory");
    };

    // leadfield gen|info
    auto* lf_cmd = app.add_subcommand("leadfield", "Generate or inspect lead fields");
    lf_cmd->require_subcommand(1);
    auto* gen = lf_cmd->add_subcommand("gen", "Generate a spherical-head lead field");
    std::string spec_path;
    int dof = 1;
    gen->add_option("--spec", spec_path, "Sphere spec JSON (head_radius, conductivity, grid_spacing, electrode_count, electrode_cap_angle)")
        ->check(CLI::ExistingFile);
    gen->add_option("--dof", dof, "Dipole components per source (1 or 3)")->check(CLI::IsMember({1, 3}));
    gen->add_option("--set", sets, "Override a spec key: key=value (repeatable)");
    gen->add_option("--out", out, "Output directory")->required();
    auto* info = lf_cmd->add_subcommand("info", "Print a lead field summary");
    std::string info_path;
    info->add_option("path", info_path, "Lead field directory, header or CSV")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate measurements for a sampled scenario");
    std::string lf_path;
    bool normalize = false;
    add_common(sim, true);
    sim->add_option("--leadfield", lf_path, "Lead field directory or header")->required();
    sim->add_flag("--normalize", normalize, "Normalize lead-field columns before simulating");

    // solve
    auto* solve = app.add_subcommand("solve", "Run one solver on a measurement file");
    std::string solver, meas_path, params_json;
    std::optional<double> alpha;
    double fs = 1000.0;
    bool use_carss = false;
    solve->add_option("--solver", solver, "Solver name")->required()->check(CLI::IsMember(solver_names()));
    solve->add_option("--leadfield", lf_path, "Lead field directory, header or CSV")->required();
    solve->add_option("--measurements", meas_path, "Measurement CSV (electrodes x samples)")->required()->check(CLI::ExistingFile);
    solve->add_option("--alpha", alpha, "Regularization parameter (absolute)");
    solve->add_option("--params", params_json, "Solver parameters as a JSON object");
    solve->add_option("--fs", fs, "Sampling rate of the measurements (Hz)");
    solve->add_flag("--normalize", normalize, "Normalize lead-field columns before solving");
    solve->add_flag("--carss", use_carss, "Reduce the solution space with CARSS first");
    solve->add_option("--out", out, "Write the estimate JSON here instead of stdout");

    // bench
    auto* bench = app.add_subcommand("bench", "Run a Monte-Carlo campaign");
    int workers = 0;
    add_common(bench, true);
    bench->add_option("--workers", workers, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

    // report
    auto* rep = app.add_subcommand("report", "Re-emit reports from a campaign JSON file");
    std::string input, format = "md";
    rep->add_option("--input", input, "campaign.json written by bench")->required()->check(CLI::ExistingFile);
    rep->add_option("--format", format, "csv, json or md");
    rep->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        json spec_doc = spec_path.empty() ? json(SphereSpec{}) : read_json_file(spec_path);
        spec_doc = with_overrides(spec_doc, sets);
        SphereSpec spec;
        try {
            spec = spec_doc.get<SphereSpec>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid sphere spec: ") + e.what());
        }
        const LeadField lf = generate_sphere_leadfield(spec, dof);
        save_leadfield(lf, out);
        std::cout << "wrote " << lf.n_electrodes() << " x " << lf.n_columns() << " lead field to " << out << "\n";
        return 0;
    }
    if (info->parsed()) {
        const LeadField lf = load_leadfield(info_path);
        json j = {{"n_electrodes", lf.n_electrodes()},
                  {"n_sources", lf.n_sources()},
                  {"dof", lf.dof()},
                  {"normalized", lf.normalized},
                  {"has_electrode_geometry", lf.electrodes && lf.electrodes->has_geometry()},
                  {"head_radius", lf.sources ? lf.sources->head_radius : 0.0},
                  {"grid_spacing", lf.sources ? lf.sources->grid_spacing : 0.0}};
        if (lf.n_columns() > 0) {
            const Vector norms = lf.gain.colwise().norm();
            j["column_norm_min"] = norms.minCoeff();
            j["column_norm_max"] = norms.maxCoeff();
        }
        const Violations v = validate(lf);
        j["violations"] = v;
        std::cout << j.dump(1) << "\n";
        return v.empty() ? 0 : 2;
    }
    if (sim->parsed()) {
        if (out.empty()) throw UsageError("simulate needs --out");
        json doc = {{"test_case", "TC-I"}, {"noise", NoiseSpec{}}, {"erps", default_erps()}, {"seed", 1}};
        if (!config.empty()) doc.merge_patch(read_json_file(config));
        doc = with_overrides(doc, sets);
        if (seed) doc["seed"] = *seed;
        for (const auto& [key, val] : doc.items())
            if (key != "test_case" && key != "noise" && key != "erps" && key != "seed")
                throw ConfigError("unknown simulate key '" + key + "'");

        LeadField lf = load_leadfield(lf_path);
        if (normalize) lf = normalize_columns(lf);
        TestCaseSpec tc;
        std::vector<ErpSpec> erps;
        NoiseSpec noise;
        std::uint64_t s = 0;
        try {
            tc = doc.at("test_case").is_string() ? test_case_preset(doc.at("test_case").get<std::string>())
                                                 : doc.at("test_case").get<TestCaseSpec>();
            erps = doc.at("erps").get<std::vector<ErpSpec>>();
            noise = doc.at("noise").get<NoiseSpec>();
            s = doc.at("seed").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid simulate config: ") + e.what());
        }
        const Scenario sc = sample_scenario(tc, *lf.sources, erps, noise, s);
        const Measurements m = simulate_measurements(lf, sc);
        fs::create_directories(out);
        write_csv_matrix(m.data, fs::path(out) / "measurements.csv");
        write_file(fs::path(out) / "scenario.json", json(sc).dump(1) + "\n");
        std::cout << "wrote " << m.data.rows() << " x " << m.data.cols() << " measurements to " << out << "\n";
        return 0;
    }
    if (solve->parsed()) {
        json params = json::object();
        if (!params_json.empty()) {
            params = json::parse(params_json, nullptr, false);
            if (params.is_discarded() || !params.is_object()) throw UsageError("--params must be a JSON object");
        }
        if (alpha) params["alpha"] = *alpha;
        LeadField lf = load_leadfield(lf_path);
        if (normalize) lf = normalize_columns(lf);
        const Measurements m = load_measurements(meas_path, fs);
        const SolverFn fn = make_solver(solver, params, m.baseline_samples);
        SourceEstimate est;
        if (use_carss) {
            if (!lf.electrodes || lf.electrodes->adjacency.empty()) throw ConfigError("--carss needs electrode geometry");
            const SignatureTable sigs = build_signatures(lf, lf.electrodes->adjacency);
            est = solve_reduced(fn, lf, m.data, reduce_solution_space(lf, sigs, m.data));
        } else {
            est = fn(lf, m.data);
        }
        print_estimate(est, out);
        return 0;
    }
    if (bench->parsed()) {
        json doc = default_campaign_config();
        if (!config.empty()) doc.merge_patch(read_json_file(config));
        doc = with_overrides(doc, sets);
        CampaignConfig cfg;
        from_json(doc, cfg);
        if (seed) cfg.seed = *seed;
        if (workers > 0) cfg.workers = workers;
        if (!out.empty()) cfg.output_dir = out;
        if (cfg.output_dir.empty()) throw UsageError("bench needs --out or output_dir in the config");
        const CampaignResult r = run_campaign(cfg);
        int failed = 0;
        for (const auto& t : r.trials) failed += t.failed ? 1 : 0;
        std::cout << "ran " << r.trials.size() << " trials (" << failed << " failed); reports in " << cfg.output_dir << "\n";
        return 0;
    }
    if (rep->parsed()) {
        const CampaignResult r = campaign_from_json(read_json_file(input));
        write_report(r, format, out);
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
