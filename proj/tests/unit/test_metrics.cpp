#include "fixtures.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/metrics.hpp"

#include <doctest.h>

using namespace sparseloc;

namespace {

// Path graph 0 - 1 - ... - (n-1).
Adjacency chain(int n) {
    Adjacency a(n);
    for (int i = 0; i + 1 < n; ++i) {
        a[i].push_back(i + 1);
        a[i + 1].push_back(i);
    }
    return a;
}

} // namespace

TEST_CASE("collapse amplitude") {
    CHECK(collapse_amplitude(Matrix::Ones(3, 5), 1) == Vector::Ones(3));
    CHECK(collapse_amplitude(Matrix::Zero(6, 4), 3).isZero(0.0));
    Matrix x = Matrix::Zero(3, 7);
    x.row(0).setConstant(3.0);
    x.row(1).setConstant(4.0);
    CHECK(collapse_amplitude(x, 3)(0) == doctest::Approx(5.0));
    Matrix w(1, 4);
    w << 0, 2, 2, 0;
    CHECK(collapse_amplitude(w, 1, std::make_pair(1, 3))(0) == doctest::Approx(2.0));
    CHECK(collapse_amplitude(w, 1)(0) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(collapse_amplitude(w, 1, std::make_pair(2, 2)), ConfigError);
    CHECK_THROWS_AS(collapse_amplitude(w, 1, std::make_pair(0, 9)), ConfigError);
}

TEST_CASE("local peaks") {
    const Adjacency a = chain(6);
    Vector m = Vector::Zero(6);
    m(3) = 1.0;
    CHECK(local_peaks(m, a) == IndexList{3});
    CHECK(local_peaks(Vector::Constant(6, 2.0), a).empty());
    m << 0, 1, 1, 0, 0.5, 0;
    CHECK(local_peaks(m, a) == IndexList{4}); // the plateau has no strict maximum
    m << 1, 0, 0.05, 0, 0, 0;
    CHECK(local_peaks(m, a, 0.1) == IndexList{0});
    CHECK(local_peaks(m, a, 0.0) == IndexList{0, 2});
}

TEST_CASE("success rate") {
    const Adjacency a = chain(10);
    CHECK(success_rate({4}, {4}, a).mean == 1.0);
    CHECK(success_rate({4}, {6}, a).hits == std::vector<int>{1}); // level-2 neighbour is a hit
    CHECK(success_rate({4}, {7}, a).mean == 0.0);                 // three hops away
    CHECK(success_rate({4}, {}, a).mean == 0.0);
    const SuccessRate two = success_rate({1, 8}, {2}, a);
    CHECK(two.hits == std::vector<int>{1, 0});
    CHECK(two.mean == 0.5);
    for (int lv = 1; lv < 5; ++lv) CHECK(success_rate({1, 8}, {4}, a, lv).mean <= success_rate({1, 8}, {4}, a, lv + 1).mean);
}

TEST_CASE("hit and false rates") {
    const Adjacency a = chain(10);
    HitFalse hf = hit_false_rates({2, 7}, {2, 7}, a);
    CHECK(hf.hr == 1.0);
    CHECK(hf.fr == 0.0);
    hf = hit_false_rates({2, 7}, {}, a);
    CHECK(hf.hr == 0.0);
    CHECK(hf.fr == 0.0);
    hf = hit_false_rates({2}, {2, 8}, a);
    CHECK(hf.hr == 1.0);
    CHECK(hf.fr == 0.5);
    // One peak cannot serve two nearby true sources.
    hf = hit_false_rates({2, 4}, {3}, a);
    CHECK(hf.hr == 0.5);
    CHECK(hf.fr == 0.0);
}

TEST_CASE("a prime") {
    CHECK(a_prime(1.0, 0.0) == 1.0);
    CHECK(a_prime(0.5, 0.5) == 0.5);
    CHECK(a_prime(0.9, 0.06) == doctest::Approx(0.92).epsilon(1e-15));
    CHECK(a_prime(0.0, 1.0) == 0.0);
    CHECK(a_prime(0.6, 0.2) < a_prime(0.7, 0.2));
    CHECK(a_prime(0.6, 0.2) > a_prime(0.6, 0.3));
    CHECK_THROWS_AS(a_prime(1.2, 0.0), ConfigError);
    CHECK_THROWS_AS(a_prime(0.5, -0.1), ConfigError);
}

TEST_CASE("dipole localization error") {
    const Vec3 p(0, 0, 0), q(10, 0, 0);
    CHECK(dle({p, q}, {p, q}) == 0.0);
    CHECK(dle({p}, {q}) == doctest::Approx(10.0));
    const double d = 24.0;
    const Vec3 b(0, d, 0);
    CHECK(dle({p, b}, {p}) == doctest::Approx(d / 4.0));
    CHECK(dle({p, b}, {q}) == doctest::Approx(dle({q}, {p, b})));
    try {
        dle({p}, {});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "undefined DLE");
    }
}

TEST_CASE("spatial dispersion") {
    const std::vector<Vec3> pos{{0, 0, 0}, {10, 0, 0}, {20, 0, 0}};
    Vector m(3);
    m << 2, 0, 0;
    CHECK(spatial_dispersion(m, {pos[0]}, pos) == 0.0);
    m << 0, 0, 1;
    CHECK(spatial_dispersion(m, {pos[0]}, pos) == doctest::Approx(20.0));
    m << 1, 1, 0;
    CHECK(spatial_dispersion(m, {pos[0]}, pos) == doctest::Approx(std::sqrt(50.0)));
    CHECK(spatial_dispersion(3.7 * m, {pos[0]}, pos) == doctest::Approx(spatial_dispersion(m, {pos[0]}, pos)));
    try {
        spatial_dispersion(Vector::Zero(3), {pos[0]}, pos);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "undefined SD");
    }
}

TEST_CASE("evaluate a whole estimate") {
    const LeadField& lf = fixtures::coarse_sphere();
    const SourceSpace& ss = *lf.sources;
    SourceEstimate est;
    est.amplitudes = Matrix::Zero(lf.n_columns(), 4);
    const int t = 77;
    est.amplitudes.row(t).setConstant(1.0);
    TrialMetrics m = evaluate(ss, {t}, est);
    CHECK(m.a_prime == 1.0);
    CHECK(m.sr_mean == 1.0);
    CHECK(*m.dle_mm == 0.0);
    CHECK(*m.sd_mm == 0.0);
    CHECK(m.peaks == IndexList{t});

    est.amplitudes.setZero();
    m = evaluate(ss, {t}, est);
    CHECK(m.a_prime == 0.5);
    CHECK(!m.dle_mm);
    CHECK(!m.sd_mm);
}
