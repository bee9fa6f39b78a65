#include "fixtures.hpp"

#include "sparseloc/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>

using namespace sparseloc;
using nlohmann::json;

namespace {

bool has(const Violations& v, const std::string& msg) { return std::find(v.begin(), v.end(), msg) != v.end(); }

SourceSpace two_sources() {
    SourceSpace ss;
    ss.positions = {{0, 0, 10}, {0, 10, 10}};
    ss.orientations = {Vec3::UnitZ(), Vec3::UnitX()};
    ss.adjacency = {{1}, {0}};
    ss.head_radius = 85.0;
    return ss;
}

} // namespace

TEST_CASE("validate accepts a consistent source space") {
    CHECK(validate(two_sources()).empty());
    CHECK(validate(*fixtures::coarse_sphere().sources).empty());
    CHECK(validate(fixtures::coarse_sphere()).empty());
    CHECK(validate(fixtures::coarse_sphere(3)).empty());
}

TEST_CASE("validate flags non-unit orientation and asymmetric adjacency") {
    SourceSpace ss = two_sources();
    ss.orientations[0] = Vec3(2, 0, 0);
    CHECK(has(validate(ss), "non-unit orientation"));

    ss = two_sources();
    ss.adjacency = {{1}, {}};
    CHECK(has(validate(ss), "asymmetric adjacency"));

    ss = two_sources();
    ss.positions[1] = {0, 0, 100};
    CHECK(has(validate(ss), "position outside head radius"));
}

TEST_CASE("validate is pure") {
    SourceSpace ss = two_sources();
    ss.orientations[1] = Vec3(0, 3, 0);
    CHECK(validate(ss) == validate(ss));
}

TEST_CASE("require_valid throws with every violation listed") {
    SourceSpace ss = two_sources();
    ss.orientations[0] = Vec3(2, 0, 0);
    ss.adjacency = {{1}, {}};
    try {
        require_valid(validate(ss), "source space");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("non-unit orientation") != std::string::npos);
        CHECK(what.find("asymmetric adjacency") != std::string::npos);
    }
}

TEST_CASE("normalized lead field with a non-unit column is rejected") {
    LeadField lf = fixtures::coarse_sphere();
    lf.gain.col(3) *= 2.0;
    CHECK(has(validate(lf), "normalized lead field has non-unit column"));
    lf = fixtures::coarse_sphere();
    lf.gain(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(has(validate(lf), "non-finite gain entry"));
}

TEST_CASE("scenario validation") {
    Scenario sc;
    sc.active_indices = {1, 1};
    sc.active_orientations = {Vec3::UnitZ(), Vec3::UnitZ()};
    sc.waveforms = Matrix::Ones(2, 4);
    CHECK(has(validate(sc, 5), "duplicate active index"));
    sc.active_indices = {1, 7};
    CHECK(has(validate(sc, 5), "active index out of range"));
    sc.active_indices = {1, 2};
    CHECK(validate(sc, 5).empty());
    sc.fs = 0.0;
    CHECK(has(validate(sc, 5), "sample rate must be positive"));
}

TEST_CASE("json round trips are identities") {
    SUBCASE("source space") {
        const SourceSpace& ss = *fixtures::coarse_sphere(3).sources;
        const SourceSpace back = json(ss).get<SourceSpace>();
        CHECK(back.positions == ss.positions);
        CHECK(back.orientations == ss.orientations);
        CHECK(back.adjacency == ss.adjacency);
        CHECK(back.dof == ss.dof);
        CHECK(back.head_radius == ss.head_radius);
        CHECK(back.grid_spacing == ss.grid_spacing);
    }
    SUBCASE("scenario") {
        Scenario sc;
        sc.active_indices = {4, 9};
        sc.active_orientations = {Vec3(0.6, 0.8, 0), std::nullopt};
        sc.waveforms = fixtures::gaussian(2, 7, 3);
        sc.fs = 250.0;
        sc.noise = {NoiseKind::pink, 1.5};
        sc.seed = 0xfedcba9876543210ULL;
        sc.baseline_samples = 2;
        const Scenario back = json(sc).get<Scenario>();
        CHECK(back.active_indices == sc.active_indices);
        CHECK(back.active_orientations == sc.active_orientations);
        CHECK(back.waveforms == sc.waveforms);
        CHECK(back.fs == sc.fs);
        CHECK(back.noise == sc.noise);
        CHECK(back.seed == sc.seed);
        CHECK(back.baseline_samples == sc.baseline_samples);
    }
    SUBCASE("source estimate") {
        SourceEstimate est;
        est.amplitudes = fixtures::gaussian(6, 3, 11);
        est.solver_name = "sbl_wipf";
        est.iterations_used = 17;
        est.converged = false;
        est.residual_norm = 0.125;
        est.extras.gamma = {0.5, 0.0, 1e-300};
        est.extras.found_indices = {2};
        est.extras.objective_trace = {3.0, 2.0, 1.0 / 3.0};
        est.extras.support_trace = {5, 3};
        est.extras.alpha = 1e-7;
        const SourceEstimate back = json(est).get<SourceEstimate>();
        CHECK(back.amplitudes == est.amplitudes);
        CHECK(back.solver_name == est.solver_name);
        CHECK(back.iterations_used == est.iterations_used);
        CHECK(back.converged == est.converged);
        CHECK(back.residual_norm == est.residual_norm);
        CHECK(back.extras == est.extras);
    }
    SUBCASE("lead field") {
        const LeadField& lf = fixtures::coarse_sphere();
        const LeadField back = json(lf).get<LeadField>();
        CHECK(back.gain == lf.gain);
        CHECK(back.column_weights == lf.column_weights);
        CHECK(back.normalized == lf.normalized);
        CHECK(back.sources->positions == lf.sources->positions);
        CHECK(back.electrodes->positions == lf.electrodes->positions);
        CHECK(back.electrodes->adjacency == lf.electrodes->adjacency);
    }
}

TEST_CASE("restrict_to re-indexes the induced subgraph") {
    const LeadField& lf = fixtures::coarse_sphere();
    const int a = 10;
    REQUIRE(!lf.sources->adjacency[a].empty());
    const int b = lf.sources->adjacency[a].front();
    const LeadField sub = lf.restrict_to({std::min(a, b), std::max(a, b)});
    CHECK(sub.n_sources() == 2);
    CHECK(sub.gain.col(0) == lf.gain.col(std::min(a, b)));
    CHECK(sub.sources->adjacency[0] == IndexList{1});
    CHECK(sub.sources->adjacency[1] == IndexList{0});
    CHECK(validate(sub).empty());
}

TEST_CASE("noise labels") {
    CHECK(noise_label({}) == "none");
    CHECK(noise_label({NoiseKind::pink, 1.0}) == "pink-1");
    CHECK(noise_label({NoiseKind::pink, 4.0}) == "pink-4");
    CHECK(noise_label({NoiseKind::sensor_percent, 5.0}) == "sensor-5");
    CHECK_THROWS_AS(noise_kind_from_string("purple"), ConfigError);
}

TEST_CASE("derive_seed separates paths and is stable") {
    CHECK(derive_seed(1, {0, 1}) != derive_seed(1, {1, 0}));
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CounterRng a(42), b(42);
    for (int i = 0; i < 5; ++i) CHECK(a() == b());
    CHECK(CounterRng(42).at(3) == a.at(3));
}
