#include "sparseloc/bench.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/leadfield_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sparseloc {

using json = nlohmann::json;

namespace {

json opt_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> num_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string csv_num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }
std::string csv_num(const std::optional<double>& v) { return v ? csv_num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string fixed3(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string with_ci(const Stat& s) {
    if (s.n == 0) return "n/a";
    return fixed3(s.mean) + " [" + fixed3(s.lo) + ", " + fixed3(s.hi) + "]";
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << text;
    if (!f) throw IoError("write failed for " + p.string());
}

json stat_json(const Stat& s) {
    if (s.n == 0) return {{"n", 0}, {"mean", nullptr}, {"lo", nullptr}, {"hi", nullptr}};
    return {{"n", s.n}, {"mean", s.mean}, {"lo", s.lo}, {"hi", s.hi}};
}

} // namespace

void to_json(json& j, const TrialResult& r) {
    j = {{"test_case", r.test_case},
         {"noise", r.noise},
         {"space", r.space},
         {"carss", r.carss},
         {"solver", r.solver},
         {"trial", r.trial},
         {"seed", r.seed},
         {"truth", r.truth},
         {"failed", r.failed},
         {"error", r.error},
         {"wall_ms", opt_num(r.wall_ms)}};
    if (!r.failed) {
        j["a_prime"] = r.metrics.a_prime;
        j["hr"] = r.metrics.hr;
        j["fr"] = r.metrics.fr;
        j["sr"] = r.metrics.sr;
        j["sr_mean"] = r.metrics.sr_mean;
        j["dle_mm"] = opt_num(r.metrics.dle_mm);
        j["sd_mm"] = opt_num(r.metrics.sd_mm);
        j["peaks"] = r.metrics.peaks;
    }
    if (r.reduction)
        j["reduction"] = {{"kept", r.reduction->kept},
                          {"ratio", r.reduction->ratio},
                          {"truth_retained", r.reduction->truth_retained},
                          {"fallback_used", r.reduction->fallback_used}};
    else
        j["reduction"] = nullptr;
}

void from_json(const json& j, TrialResult& r) {
    r = TrialResult{};
    r.test_case = j.at("test_case").get<std::string>();
    r.noise = j.at("noise").get<std::string>();
    r.space = j.at("space").get<std::string>();
    r.carss = j.at("carss").get<bool>();
    r.solver = j.at("solver").get<std::string>();
    r.trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.truth = j.value("truth", IndexList{});
    r.failed = j.at("failed").get<bool>();
    r.error = j.value("error", std::string{});
    r.wall_ms = num_opt(j, "wall_ms");
    if (!r.failed) {
        r.metrics.a_prime = j.at("a_prime").get<double>();
        r.metrics.hr = j.value("hr", 0.0);
        r.metrics.fr = j.value("fr", 0.0);
        r.metrics.sr = j.value("sr", std::vector<int>{});
        r.metrics.sr_mean = j.at("sr_mean").get<double>();
        r.metrics.dle_mm = num_opt(j, "dle_mm");
        r.metrics.sd_mm = num_opt(j, "sd_mm");
        r.metrics.peaks = j.value("peaks", IndexList{});
    }
    if (j.contains("reduction") && !j.at("reduction").is_null()) {
        const json& rj = j.at("reduction");
        ReductionSummary rs;
        rs.kept = rj.at("kept").get<int>();
        rs.ratio = rj.at("ratio").get<double>();
        rs.truth_retained = rj.value("truth_retained", 0);
        rs.fallback_used = rj.value("fallback_used", false);
        r.reduction = rs;
    }
}

std::string trials_csv(const std::vector<TrialResult>& trials) {
    std::ostringstream os;
    os << kTrialCsvHeader << '\n';
    for (const auto& r : trials) {
        os << csv_field(r.test_case) << ',' << csv_field(r.noise) << ',' << csv_field(r.space) << ','
           << (r.carss ? "on" : "off") << ',' << csv_field(r.solver) << ',' << r.trial << ',' << r.seed << ',';
        if (r.failed) os << ",,,,";
        else
            os << csv_num(r.metrics.a_prime) << ',' << csv_num(r.metrics.sr_mean) << ',' << csv_num(r.metrics.dle_mm)
               << ',' << csv_num(r.metrics.sd_mm) << ',';
        os << (r.reduction ? std::to_string(r.reduction->kept) : std::string()) << ',' << csv_num(r.wall_ms) << ','
           << (r.failed ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string aggregates_csv(const std::vector<Aggregate>& aggs) {
    std::ostringstream os;
    os << "test_case,noise,space,carss,solver,trials,failed,"
          "a_prime_mean,a_prime_lo,a_prime_hi,sr_mean,sr_lo,sr_hi,"
          "dle_n,dle_mean,dle_lo,dle_hi,sd_n,sd_mean,sd_lo,sd_hi,"
          "paired_n,a_prime_paired_diff,paired_lo,paired_hi\n";
    auto stat = [&](const Stat& s, bool with_n) {
        if (with_n) os << s.n << ',';
        os << csv_num(s.mean) << ',' << csv_num(s.lo) << ',' << csv_num(s.hi);
    };
    for (const auto& a : aggs) {
        os << csv_field(a.test_case) << ',' << csv_field(a.noise) << ',' << csv_field(a.space) << ','
           << (a.carss ? "on" : "off") << ',' << csv_field(a.solver) << ',' << a.trials << ',' << a.failed << ',';
        stat(a.a_prime, false);
        os << ',';
        stat(a.sr_mean, false);
        os << ',';
        stat(a.dle_mm, true);
        os << ',';
        stat(a.sd_mm, true);
        os << ',';
        if (a.paired_diff) stat(*a.paired_diff, true);
        else os << ",,,";
        os << '\n';
    }
    return os.str();
}

json campaign_json(const CampaignResult& r) {
    json aggs = json::array();
    for (const auto& a : r.aggregates) {
        json aj = {{"test_case", a.test_case}, {"noise", a.noise},     {"space", a.space},
                   {"carss", a.carss},         {"solver", a.solver},   {"trials", a.trials},
                   {"failed", a.failed},       {"a_prime", stat_json(a.a_prime)}, {"sr_mean", stat_json(a.sr_mean)},
                   {"dle_mm", stat_json(a.dle_mm)}, {"sd_mm", stat_json(a.sd_mm)}};
        aj["a_prime_paired_diff"] = a.paired_diff ? stat_json(*a.paired_diff) : json(nullptr);
        aggs.push_back(std::move(aj));
    }
    return {{"format", "sparseloc-campaign"},
            {"format_version", 1},
            {"ci_method", "two-sided 95% Student-t over trials"},
            {"config", r.config},
            {"trials", r.trials},
            {"aggregates", std::move(aggs)}};
}

CampaignResult campaign_from_json(const json& j) {
    if (j.value("format", std::string{}) != "sparseloc-campaign") throw ParseError("not a campaign result file");
    CampaignResult r;
    r.config = j.value("config", json::object());
    try {
        r.trials = j.at("trials").get<std::vector<TrialResult>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed campaign trials: ") + e.what());
    }
    r.aggregates = aggregate(r.trials);
    return r;
}

std::string summary_markdown(const CampaignResult& r) {
    std::ostringstream os;
    os << "# Campaign summary\n\n";
    if (r.config.contains("seed")) os << "Seed " << r.config.at("seed").dump();
    if (r.config.contains("trials")) os << ", " << r.config.at("trials").dump() << " trials per cell";
    os << ". Intervals are two-sided 95% Student-t over successful trials.\n";

    std::vector<std::string> cases;
    for (const auto& a : r.aggregates)
        if (std::find(cases.begin(), cases.end(), a.test_case) == cases.end()) cases.push_back(a.test_case);

    for (const auto& tc : cases) {
        os << "\n## " << tc << "\n\n";
        os << "| Solver | Space | Noise | CARSS | A' (95% CI) | SR | DLE mm | SD mm | Failed |\n";
        os << "|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& a : r.aggregates) {
            if (a.test_case != tc) continue;
            os << "| " << a.solver << " | " << a.space << " | " << a.noise << " | " << (a.carss ? "on" : "off") << " | "
               << with_ci(a.a_prime) << " | " << with_ci(a.sr_mean) << " | " << with_ci(a.dle_mm) << " | "
               << with_ci(a.sd_mm) << " | " << a.failed << "/" << a.trials << " |\n";
        }
        bool any_paired = false;
        for (const auto& a : r.aggregates) any_paired = any_paired || (a.test_case == tc && a.paired_diff);
        if (!any_paired) continue;
        os << "\nPaired A'(with CARSS) - A'(without):\n\n";
        os << "| Solver | Space | Noise | Mean difference (95% CI) | Pairs |\n|---|---|---|---|---|\n";
        for (const auto& a : r.aggregates)
            if (a.test_case == tc && a.paired_diff)
                os << "| " << a.solver << " | " << a.space << " | " << a.noise << " | " << with_ci(*a.paired_diff)
                   << " | " << a.paired_diff->n << " |\n";
    }
    return os.str();
}

void ensure_writable_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto probe = dir / ".write-probe";
    {
        std::ofstream f(probe);
        if (!f) throw IoError("output directory is not writable: " + dir.string());
    }
    std::filesystem::remove(probe, ec);
}

void write_report(const CampaignResult& r, const std::string& format, const std::filesystem::path& dir) {
    if (format != "csv" && format != "json" && format != "md") throw UsageError("unknown report format '" + format + "'");
    if (r.trials.empty()) throw ConfigError("no trial results to report");
    ensure_writable_dir(dir);
    if (format == "csv") {
        write_text(dir / "trials.csv", trials_csv(r.trials));
        write_text(dir / "aggregates.csv", aggregates_csv(r.aggregates));
    } else if (format == "json") {
        write_text(dir / "campaign.json", campaign_json(r).dump(1) + "\n");
    } else {
        write_text(dir / "summary.md", summary_markdown(r));
    }
}

void write_all_reports(const CampaignResult& r, const std::filesystem::path& dir) {
    for (const char* f : {"csv", "json", "md"}) write_report(r, f, dir);
}

} // namespace sparseloc
