#include "fixtures.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/metrics.hpp"
#include "sparseloc/scanners.hpp"

#include <doctest.h>

#include <set>

using namespace sparseloc;

namespace {

// Three well-separated sources on the coarse sphere with independent time courses.
Matrix three_sources(const LeadField& lf, const IndexList& idx, double noise = 0.0) {
    const Matrix w = fixtures::gaussian(3, 40, 123);
    Matrix y = Matrix::Zero(lf.n_electrodes(), 40);
    for (int i = 0; i < 3; ++i) y += lf.gain.col(idx[i]) * w.row(i);
    if (noise > 0.0) y += noise * y.cwiseAbs().maxCoeff() * fixtures::gaussian(lf.n_electrodes(), 40, 321);
    return y;
}

IndexList sorted(IndexList v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("signal subspace estimation") {
    const LeadField& lf = fixtures::coarse_sphere();
    SUBCASE("rank one") {
        const Matrix y = lf.gain.col(7) * fixtures::gaussian(1, 30, 1);
        const SubspaceModel s = estimate_signal_subspace(y);
        CHECK(s.n_est == 1);
        CHECK(s.n_tilde == 3);
        CHECK(s.us.cols() == 3);
        // Only the signal direction survives; numerically null directions are zeroed.
        CHECK(s.us.col(0).norm() == doctest::Approx(1.0));
        CHECK(s.us.rightCols(2).isZero(0.0));
    }
    SUBCASE("three sources with small noise") {
        const SubspaceModel s = estimate_signal_subspace(three_sources(lf, {5, 100, 200}, 1e-3));
        CHECK(s.n_est == 3);
        CHECK(s.n_tilde == 5);
        for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i) CHECK(s.eigenvalues(i) <= s.eigenvalues(i - 1));
    }
    SUBCASE("hint overrides the estimate") {
        CHECK(estimate_signal_subspace(three_sources(lf, {5, 100, 200}), 5).n_tilde == 5);
        CHECK(estimate_signal_subspace(lf.gain.col(7) * fixtures::gaussian(1, 30, 1), 5).n_tilde == 5);
    }
    SUBCASE("short windows are flagged") {
        CHECK(estimate_signal_subspace(lf.gain.col(7) * fixtures::gaussian(1, 4, 1)).short_window);
    }
    SUBCASE("empty signal") {
        CHECK_THROWS_AS(estimate_signal_subspace(Matrix::Zero(lf.n_electrodes(), 5)), Error);
    }
}

TEST_CASE("music localizer at the first iteration") {
    const LeadField& lf = fixtures::coarse_sphere();
    const int j = 61;
    const SubspaceModel s = estimate_signal_subspace(lf.gain.col(j) * fixtures::gaussian(1, 20, 2), 1);
    const Matrix q = Matrix::Identity(lf.n_electrodes(), lf.n_electrodes());
    const Vector mu = music_localizer(lf, q, s.us);
    for (int c = 0; c < lf.n_sources(); ++c) {
        const double ref = (s.us.transpose() * lf.gain.col(c)).norm() / lf.gain.col(c).norm();
        CHECK(mu(c) == doctest::Approx(ref).epsilon(1e-12));
        CHECK(mu(c) <= 1.0 + 1e-9);
        CHECK(mu(c) >= 0.0);
    }
    CHECK(std::abs(mu(j) - 1.0) < 1e-6);

    // After projecting the source out its own value collapses.
    const Matrix b = lf.gain.col(j);
    const Matrix qj = q - b * b.transpose() / b.squaredNorm();
    CHECK(music_localizer(lf, qj, s.us)(j) <= 1e-6);
}

TEST_CASE("trap-music finds a single noiseless dipole") {
    const LeadField& lf = fixtures::coarse_sphere();
    const int j = 150;
    const SubspaceModel s = estimate_signal_subspace(lf.gain.col(j) * fixtures::gaussian(1, 30, 3));
    const ScanResult r = trap_music(lf, s);
    REQUIRE(!r.found.empty());
    CHECK(r.found.front() == j);
    CHECK(std::abs(r.trace.front() - 1.0) < 1e-6);
    CHECK(r.found.size() == 1);
    if (r.trace.size() > 1) CHECK(r.trace[1] <= 0.5 * r.trace[0]);
}

TEST_CASE("trap-music on three separated sources") {
    const LeadField& lf = fixtures::coarse_sphere();
    const IndexList truth{5, 100, 200};
    for (bool truncate : {true, false}) {
        ScanOptions o;
        o.truncate = truncate;
        const ScanResult r = trap_music(lf, estimate_signal_subspace(three_sources(lf, truth), 5), o);
        CHECK(sorted(r.found) == truth);
        CHECK(std::set<int>(r.found.begin(), r.found.end()).size() == r.found.size());
        for (double v : r.trace) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-9);
        }
    }
    const SourceEstimate est = trap_music_solve(lf, three_sources(lf, truth), {}, 5);
    CHECK(sorted(est.extras.found_indices) == truth);
    CHECK(est.residual_norm < 1e-8 * three_sources(lf, truth).norm());
    CHECK(est.solver_name == "trap_music");
}

TEST_CASE("trap-music with free orientations") {
    const LeadField& lf = fixtures::coarse_sphere(3);
    const Matrix w = fixtures::gaussian(2, 30, 5);
    const Matrix y = lf.block(10) * Vec3(1, 0, 0) * w.row(0) + lf.block(190) * Vec3(0, 0.6, 0.8) * w.row(1);
    const ScanResult r = trap_music(lf, estimate_signal_subspace(y));
    CHECK(sorted(r.found) == IndexList{10, 190});
}

TEST_CASE("trap-music rejects bad input") {
    const LeadField& lf = fixtures::coarse_sphere();
    SubspaceModel s = estimate_signal_subspace(lf.gain.col(3) * fixtures::gaussian(1, 10, 1));
    ScanOptions o;
    o.drop_factor = 1.5;
    CHECK_THROWS_AS(trap_music(lf, s, o), ConfigError);
    s.us = Matrix::Zero(4, s.n_tilde);
    CHECK_THROWS_AS(trap_music(lf, s), ConfigError);
}

TEST_CASE("variation operator") {
    SUBCASE("single edge") {
        SourceSpace ss;
        ss.positions = {{0, 0, 0}, {1, 0, 0}};
        ss.orientations = {Vec3::UnitZ(), Vec3::UnitZ()};
        ss.adjacency = {{1}, {0}};
        const VariationOperator v = variation_operator(ss);
        REQUIRE(v.n_edges() == 1);
        const Matrix d = Matrix(v.v);
        CHECK(d.rows() == 1);
        CHECK(d(0, 0) == 1.0);
        CHECK(d(0, 1) == -1.0);
    }
    SUBCASE("2x2 planar grid with 4-adjacency") {
        SourceSpace ss;
        ss.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
        ss.orientations.assign(4, Vec3::UnitZ());
        ss.adjacency = {{1, 2}, {0, 3}, {0, 3}, {1, 2}};
        const VariationOperator v = variation_operator(ss);
        CHECK(v.n_edges() == 4);
        CHECK(v.v.rows() == 4);
        const std::vector<std::pair<int, int>> edges{{0, 1}, {0, 2}, {1, 3}, {2, 3}};
        CHECK(v.edges == edges);
    }
    SUBCASE("constants on components are in the null space") {
        const SourceSpace& ss = *fixtures::coarse_sphere(3).sources;
        const VariationOperator v = variation_operator(ss);
        CHECK(v.v.cols() == 3 * ss.size());
        Matrix x(3 * ss.size(), 2);
        for (int j = 0; j < ss.size(); ++j) x.middleRows(3 * j, 3) << 1, 2, 3, 4, 5, 6;
        CHECK((v.v * x).norm() == 0.0);
        x(4, 0) += 1e-3;
        CHECK((v.v * x).cwiseAbs().sum() > 0.0);
    }
}

TEST_CASE("sissy") {
    const LeadField& lf = fixtures::coarse_sphere();
    const VariationOperator vop = variation_operator(*lf.sources);

    // A patch: a source and its level-1 neighbors with equal amplitude.
    const int centre = 120;
    IndexList patch{centre};
    for (int n : lf.sources->adjacency[centre]) patch.push_back(n);
    Matrix x_true = Matrix::Zero(lf.n_columns(), 1);
    for (int j : patch) x_true(j, 0) = 1.0;
    const Matrix y = lf.gain * x_true;
    const double kty = (lf.gain.transpose() * y).cwiseAbs().maxCoeff();

    SUBCASE("large lambda zeroes the estimate") {
        SissyOptions o;
        o.lambda = 10.0 * kty;
        o.alpha = 0.1;
        CHECK(sissy_solve(lf, y, vop, o).amplitudes.norm() < 1e-8 * x_true.norm());
    }
    SUBCASE("patch recovery without the sparsity term") {
        SissyOptions o;
        o.lambda = 1e-3 * kty;
        o.max_iter = 1000;
        const SourceEstimate est = sissy_solve(lf, y, vop, o);
        const IndexList support = automatic_threshold(collapse_amplitude(est.amplitudes, 1), lf.sources->adjacency);
        int covered = 0;
        for (int j : patch) covered += std::binary_search(support.begin(), support.end(), j);
        CHECK(covered >= 0.8 * static_cast<double>(patch.size()));

        const auto& obj = est.extras.objective_trace;
        for (std::size_t i = 6; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] + 1e-8 * std::abs(obj[i - 1]));
        CHECK(obj.back() == doctest::Approx(sissy_objective(lf, y, vop, o.lambda, o.alpha, est.amplitudes)));
    }
    SUBCASE("small lambda approaches least squares") {
        // Overdetermined: 12 electrodes, 5 sources on a chain.
        const Matrix k = fixtures::gaussian(12, 5, 17);
        const LeadField small = fixtures::from_gain(k);
        const Matrix yy = fixtures::gaussian(12, 3, 18);
        const double ls = (yy - k * (k.transpose() * k).ldlt().solve(k.transpose() * yy)).norm();
        SissyOptions o;
        o.lambda = 1e-8;
        o.alpha = 0.1;
        o.max_iter = 5000;
        o.tol = 1e-10;
        const SourceEstimate est = sissy_solve(small, yy, variation_operator(*small.sources), o);
        CHECK(est.residual_norm <= 1.05 * ls);
    }
}

TEST_CASE("automatic threshold") {
    const SourceSpace& ss = *fixtures::coarse_sphere().sources;
    Vector map = Vector::Zero(ss.size());
    SUBCASE("single nonzero source") {
        map(42) = 3.0;
        CHECK(automatic_threshold(map, ss.adjacency) == IndexList{42});
    }
    SUBCASE("two equal peaks far apart") {
        map(0) = 1.0;
        map(ss.size() - 1) = 1.0;
        CHECK(automatic_threshold(map, ss.adjacency) == IndexList{0, ss.size() - 1});
    }
    SUBCASE("a weak second peak is dropped") {
        map(0) = 1.0;
        map(ss.size() - 1) = 0.05;
        CHECK(automatic_threshold(map, ss.adjacency) == IndexList{0});
    }
    SUBCASE("a smooth blob is one region") {
        const int c = 120;
        map(c) = 1.0;
        for (int n : ss.adjacency[c]) map(n) = 0.5;
        const IndexList r = automatic_threshold(map, ss.adjacency);
        CHECK(r.size() == ss.adjacency[c].size() + 1);
    }
}
