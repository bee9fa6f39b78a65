#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "sparseloc_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Runs the CLI inside the work directory; stdout and stderr go to files.
int run(const std::string& args) {
    const std::string cmd = "cd '" + workdir().string() + "' && '" SPARSELOC_CLI_PATH "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(workdir() / p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(workdir() / p, std::ios::binary) << text; }

const char* kSmallSphere = "--set head_radius=85 --set grid_spacing=20 --set electrode_count=32";

} // namespace

TEST_CASE("cli version and usage errors") {
    CHECK(run("--version") == 0);
    CHECK(slurp("stdout.txt").find("sparseloc") != std::string::npos);
    CHECK(run("") == 1);
    CHECK(run("solve --no-such-flag") == 1);
    CHECK(run("leadfield gen --dof 2 --out x") == 1);
    CHECK(run("bench --set trials=2") == 1); // nowhere to write
}

TEST_CASE("cli leadfield, simulate and solve") {
    REQUIRE(run(std::string("leadfield gen ") + kSmallSphere + " --out lf") == 0);
    CHECK(fs::exists(workdir() / "lf" / "leadfield.json"));
    REQUIRE(run("leadfield info lf") == 0);
    const json info = json::parse(slurp("stdout.txt"));
    CHECK(info["n_electrodes"] == 32);
    CHECK(info["dof"] == 1);

    CHECK(run("leadfield info missing_dir") == 2);
    CHECK(run(std::string("leadfield gen ") + kSmallSphere + " --set grid_spacing=-1 --out bad") == 2);

    REQUIRE(run("simulate --leadfield lf --normalize --seed 3 --out sim") == 0);
    const std::string first = slurp("sim/measurements.csv");
    REQUIRE(run("simulate --leadfield lf --normalize --seed 3 --out sim2") == 0);
    CHECK(slurp("sim2/measurements.csv") == first);
    REQUIRE(run("simulate --leadfield lf --normalize --seed 4 --out sim3") == 0);
    CHECK(slurp("sim3/measurements.csv") != first);

    REQUIRE(run("solve --solver mxne --leadfield lf --normalize --measurements sim/measurements.csv --alpha 0.5 --out est.json") == 0);
    const json est = json::parse(slurp("est.json"));
    CHECK(est["solver"] == "mxne");
    CHECK(est["amplitudes"]["cols"] == 50);

    REQUIRE(run("solve --solver sloreta --leadfield lf --normalize --measurements sim/measurements.csv --carss") == 0);
    CHECK(!json::parse(slurp("stdout.txt"))["extras"]["reduced_indices"].empty());

    CHECK(run("solve --solver mxne --leadfield lf --measurements sim/measurements.csv --params '{\"alpah\": 1}'") == 2);
    write("ragged.csv", "1,2\n3\n");
    CHECK(run("solve --solver mne --leadfield lf --measurements ragged.csv") == 2);
}

TEST_CASE("cli bench and report") {
    write("campaign.json", R"({"spaces": [{"sphere": {"head_radius": 85, "grid_spacing": 20, "electrode_count": 32}}],
                               "solvers": ["sloreta", "mxne"], "trials": 3, "carss": "both"})");
    REQUIRE(run("bench --config campaign.json --seed 9 --workers 1 --out run1") == 0);
    REQUIRE(run("bench --config campaign.json --seed 9 --workers 2 --out run2") == 0);
    for (const char* f : {"trials.csv", "aggregates.csv", "summary.md", "campaign.json"})
        CHECK(slurp(fs::path("run1") / f) == slurp(fs::path("run2") / f));

    REQUIRE(run("bench --config campaign.json --seed 10 --out run3") == 0);
    CHECK(slurp("run3/trials.csv") != slurp("run1/trials.csv"));

    REQUIRE(run("report --input run1/campaign.json --format md --out rep") == 0);
    CHECK(slurp("rep/summary.md") == slurp("run1/summary.md"));
    REQUIRE(run("report --input run1/campaign.json --format csv --out rep") == 0);
    CHECK(slurp("rep/trials.csv") == slurp("run1/trials.csv"));
    CHECK(run("report --input run1/campaign.json --format xml --out rep") == 1);

    write("typo.json", R"({"trails": 3})");
    CHECK(run("bench --config typo.json --out run4") == 2);
    CHECK(run("bench --config campaign.json --set trials=0 --out run4") == 2);
}
