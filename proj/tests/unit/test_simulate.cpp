#include "fixtures.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/simulate.hpp"

#include <unsupported/Eigen/FFT>

#include <doctest.h>

#include <complex>

using namespace sparseloc;

namespace {

Scenario one_source(int j, const Vector& w) {
    Scenario sc;
    sc.active_indices = {j};
    sc.active_orientations = {Vec3::UnitZ()};
    sc.waveforms = w.transpose();
    sc.fs = 1000.0;
    return sc;
}

double distance(const SourceSpace& ss, int a, int b) { return (ss.positions[a] - ss.positions[b]).norm(); }

} // namespace

TEST_CASE("erp waveform") {
    SUBCASE("single peak hits its amplitude at its latency") {
        const Vector w = erp_waveform({{{500.0, 200.0, 1.0}}, 1000.0, 1000.0});
        CHECK(w.size() == 1000);
        CHECK(w(500) == doctest::Approx(1.0).epsilon(1e-12));
        Eigen::Index arg;
        w.maxCoeff(&arg);
        CHECK(arg == 500);
        // Half maximum 100 ms either side of the peak.
        CHECK(w(400) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(w(600) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("empty peak list") {
        CHECK(erp_waveform(ErpSpec{{}, 100.0, 1000.0}).isZero(0.0));
    }
    SUBCASE("superposition of peaks") {
        const ErpPeak a{200.0, 50.0, 1.2}, b{800.0, 100.0, -0.6};
        const Vector both = erp_waveform({{a, b}, 1000.0, 500.0});
        const Vector sum = erp_waveform({{a}, 1000.0, 500.0}) + erp_waveform({{b}, 1000.0, 500.0});
        CHECK((both - sum).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("noiseless simulation is the forward product") {
    const LeadField& lf = fixtures::coarse_sphere();
    const Vector w = erp_waveform({{{50.0, 20.0, 1.0}}, 100.0, 1000.0});

    SUBCASE("zero waveform") {
        CHECK(simulate_measurements(lf, one_source(3, Vector::Zero(w.size()))).data.isZero(0.0));
    }
    SUBCASE("single source is rank one") {
        const int j = 40;
        const Scenario sc = one_source(j, w);
        const Matrix y = simulate_measurements(lf, sc).data;
        // The fixed orientation is radial, so project the scenario's +z marker on it.
        const double proj = lf.sources->orientations[j]->dot(Vec3::UnitZ());
        CHECK((y - proj * lf.gain.col(j) * w.transpose()).norm() < 1e-12 * y.norm());
    }
    SUBCASE("superposition") {
        Scenario a = one_source(5, w), b = one_source(77, 0.5 * w);
        Scenario ab = a;
        ab.active_indices.push_back(77);
        ab.active_orientations.push_back(Vec3::UnitZ());
        ab.waveforms.conservativeResize(2, Eigen::NoChange);
        ab.waveforms.row(1) = b.waveforms.row(0);
        const Matrix sum = simulate_measurements(lf, a).data + simulate_measurements(lf, b).data;
        CHECK((simulate_measurements(lf, ab).data - sum).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("free marker is a config error with fixed orientations") {
        Scenario sc = one_source(5, w);
        sc.active_orientations[0] = std::nullopt;
        CHECK_THROWS_AS(simulate_measurements(lf, sc), ConfigError);
    }
}

TEST_CASE("simulation is deterministic per seed") {
    const LeadField& lf = fixtures::coarse_sphere();
    Scenario sc = one_source(12, erp_waveform({{{50.0, 20.0, 1.0}}, 100.0, 1000.0}));
    sc.noise = {NoiseKind::pink, 1.0};
    sc.seed = 99;
    const Matrix a = simulate_measurements(lf, sc).data;
    CHECK(a == simulate_measurements(lf, sc).data);
    sc.seed = 100;
    CHECK(a != simulate_measurements(lf, sc).data);
}

TEST_CASE("gen_noise scaling and statistics") {
    SUBCASE("per-channel max equals amplitude") {
        for (NoiseKind k : {NoiseKind::white, NoiseKind::pink, NoiseKind::brown}) {
            const Matrix n = gen_noise(k, 1.0, 8, 512, 250.0, 7);
            for (Eigen::Index c = 0; c < n.rows(); ++c) CHECK(n.row(c).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
        }
        const Matrix four = gen_noise(NoiseKind::pink, 4.0, 3, 256, 250.0, 7);
        for (Eigen::Index c = 0; c < four.rows(); ++c) CHECK(four.row(c).cwiseAbs().maxCoeff() == doctest::Approx(4.0).epsilon(1e-14));
    }
    SUBCASE("channels are independent streams") {
        const Matrix n = gen_noise(NoiseKind::white, 1.0, 2, 256, 250.0, 3);
        CHECK(n.row(0) != n.row(1));
        CHECK(n == gen_noise(NoiseKind::white, 1.0, 2, 256, 250.0, 3));
    }
    SUBCASE("white mean shrinks with length") {
        const int t = 20000;
        const Matrix n = gen_noise(NoiseKind::white, 1.0, 4, t, 1000.0, 21);
        for (Eigen::Index c = 0; c < n.rows(); ++c) {
            const double mean = n.row(c).mean();
            const double sd = std::sqrt((n.row(c).array() - mean).square().sum() / (t - 1));
            CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(t)));
        }
    }
    SUBCASE("coloured noise has no DC component") {
        const Matrix n = gen_noise(NoiseKind::brown, 1.0, 2, 1024, 250.0, 8);
        for (Eigen::Index c = 0; c < n.rows(); ++c) CHECK(std::abs(n.row(c).mean()) < 1e-12);
    }
}

TEST_CASE("pink and brown spectra have the target log-log slope") {
    // Least-squares slope of the averaged periodogram; 50 seeds, T = 4096.
    auto slope = [](NoiseKind kind) {
        const int t = 4096, seeds = 50;
        Eigen::FFT<double> fft;
        Vector power = Vector::Zero(t / 2);
        for (int s = 0; s < seeds; ++s) {
            const Matrix n = gen_noise(kind, 1.0, 1, t, 1000.0, 1000 + s);
            std::vector<double> x(n.data(), n.data() + t);
            std::vector<std::complex<double>> spec;
            fft.fwd(spec, x);
            for (int k = 1; k < t / 2; ++k) power(k) += std::norm(spec[k]);
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int m = t / 2 - 1;
        for (int k = 1; k < t / 2; ++k) {
            const double lx = std::log10(static_cast<double>(k)), ly = std::log10(power(k) / seeds);
            sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
        }
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    };
    CHECK(std::abs(slope(NoiseKind::pink) + 1.0) <= 0.2);
    CHECK(std::abs(slope(NoiseKind::brown) + 2.0) <= 0.3);
    CHECK(std::abs(slope(NoiseKind::white)) <= 0.1);
}

TEST_CASE("sensor noise") {
    Measurements m;
    m.data = Matrix::Zero(10, 10000);
    m.data(0, 0) = 1.0;
    SUBCASE("zero percent leaves data untouched") {
        CHECK(add_sensor_noise(m, 0.0, 1).data == m.data);
    }
    SUBCASE("ten percent of unit max gives std 0.1") {
        const Matrix e = add_sensor_noise(m, 10.0, 2).data - m.data;
        const double mean = e.mean();
        const double sd = std::sqrt((e.array() - mean).square().sum() / static_cast<double>(e.size() - 1));
        CHECK(sd == doctest::Approx(0.1).epsilon(0.05));
    }
    SUBCASE("seeds give different realizations") {
        CHECK(add_sensor_noise(m, 5.0, 3).data != add_sensor_noise(m, 5.0, 4).data);
    }
}

TEST_CASE("scenario sampling honours the test-case predicates") {
    const LeadField& lf = fixtures::campaign_sphere();
    const SourceSpace& ss = *lf.sources;
    const std::vector<ErpSpec> erps{{{{500.0, 200.0, 1.0}}, 1000.0, 50.0}};

    SUBCASE("TC-II") {
        const TestCaseSpec tc = test_case_preset("TC-II");
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Scenario sc = sample_scenario(tc, ss, erps, {}, seed);
            REQUIRE(sc.active_indices.size() == 3);
            for (int a = 0; a < 3; ++a) {
                CHECK(ss.positions[sc.active_indices[a]].norm() >= 90.0);
                for (int b = a + 1; b < 3; ++b) CHECK(distance(ss, sc.active_indices[a], sc.active_indices[b]) >= 80.0);
            }
            CHECK(satisfies(tc, ss, sc.active_indices));
        }
    }
    SUBCASE("TC-I admits any source") {
        const TestCaseSpec tc = test_case_preset("TC-I");
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            const Scenario sc = sample_scenario(tc, ss, erps, {}, seed);
            CHECK(sc.active_indices.size() == 1);
            CHECK(validate(sc, ss.size()).empty());
        }
    }
    SUBCASE("TC-III depth bands") {
        const TestCaseSpec tc = test_case_preset("TC-III");
        const Scenario sc = sample_scenario(tc, ss, erps, {}, 5);
        REQUIRE(sc.active_indices.size() == 5);
        for (int i = 0; i < 3; ++i) CHECK(ss.positions[sc.active_indices[i]].norm() <= 60.0);
        const double mid = ss.positions[sc.active_indices[3]].norm();
        CHECK(mid >= 60.0);
        CHECK(mid <= 80.0);
        CHECK(ss.positions[sc.active_indices[4]].norm() >= 70.0);
        CHECK(satisfies(tc, ss, sc.active_indices));
    }
    SUBCASE("same seed, same scenario") {
        const TestCaseSpec tc = test_case_preset("TC-II");
        const Scenario a = sample_scenario(tc, ss, erps, {}, 17);
        const Scenario b = sample_scenario(tc, ss, erps, {}, 17);
        CHECK(a.active_indices == b.active_indices);
        CHECK(a.waveforms == b.waveforms);
    }
    SUBCASE("unsatisfiable constraints") {
        TestCaseSpec tc;
        tc.name = "impossible";
        tc.bands = {{"far", 2, 0.0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()}};
        tc.min_pairwise_distance = 1000.0;
        try {
            sample_scenario(tc, ss, erps, {}, 1);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("constraints unsatisfiable") != std::string::npos);
        }
        CHECK_THROWS_AS(test_case_preset("TC-IX"), ConfigError);
    }
}
