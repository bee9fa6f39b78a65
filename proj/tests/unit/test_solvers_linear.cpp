#include "fixtures.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/metrics.hpp"
#include "sparseloc/solvers_linear.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <doctest.h>

using namespace sparseloc;

namespace {

LinearSolverOptions fixed(double alpha, WeightMode mode = WeightMode::identity) {
    LinearSolverOptions o;
    o.alpha_rule = AlphaRule::fixed;
    o.alpha = alpha;
    o.weight_mode = mode;
    return o;
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

int argmax_power(const SourceEstimate& est, int dof) {
    Eigen::Index arg;
    collapse_amplitude(est.amplitudes, dof).maxCoeff(&arg);
    return static_cast<int>(arg);
}

} // namespace

TEST_CASE("mne on identity and orthonormal operators") {
    SUBCASE("identity") {
        const LeadField lf = fixtures::from_gain(Matrix::Identity(4, 4));
        const Matrix y = Vector::Unit(4, 0);
        const SourceEstimate est = mne_solve(lf, y, fixed(0.0));
        CHECK(rel(est.amplitudes, y) < 1e-14);
        CHECK(est.solver_name == "mne");
    }
    SUBCASE("orthonormal rows") {
        const Matrix q = Eigen::HouseholderQR<Matrix>(fixtures::gaussian(7, 7, 4)).householderQ();
        const Matrix k = q.topRows(3);
        const Matrix y = fixtures::gaussian(3, 2, 5);
        const SourceEstimate est = mne_solve(fixtures::from_gain(k), y, fixed(0.0));
        CHECK(rel(est.amplitudes, k.transpose() * y) < 1e-12);
    }
}

TEST_CASE("mne matches an explicit small inverse") {
    Matrix k(2, 3);
    k << 1, 0, 1, 0, 1, 1;
    Vector y(2);
    y << 1, 1;
    // K K^T + 0.1 I = [[2.1, 1], [1, 2.1]]; inverse by the 2x2 cofactor formula.
    const double det = 2.1 * 2.1 - 1.0;
    Matrix inv(2, 2);
    inv << 2.1 / det, -1.0 / det, -1.0 / det, 2.1 / det;
    const Vector expected = k.transpose() * inv * y;
    const SourceEstimate est = mne_solve(fixtures::from_gain(k), y, fixed(0.1));
    CHECK(rel(est.amplitudes, expected) < 1e-10);
    CHECK(est.extras.alpha == 0.1);
}

TEST_CASE("mne residual shrinks with alpha and obeys the normal equations") {
    const Matrix k = fixtures::gaussian(6, 15, 31);
    const Matrix y = fixtures::gaussian(6, 3, 32);
    const LeadField lf = fixtures::from_gain(k);
    double prev = -1.0;
    for (double a : {10.0, 1.0, 0.1, 0.01, 0.001}) {
        const SourceEstimate est = mne_solve(lf, y, fixed(a));
        if (prev >= 0.0) CHECK(est.residual_norm <= prev * (1.0 + 1e-12));
        prev = est.residual_norm;

        for (WeightMode mode : {WeightMode::identity, WeightMode::depth}) {
            const Matrix pkt = prior_times_gain_t(lf, mode);
            const Matrix g = k * pkt + a * Matrix::Identity(6, 6);
            const Matrix z = g.fullPivLu().solve(y);
            CHECK(rel(mne_solve(lf, y, fixed(a, mode)).amplitudes, pkt * z) < 1e-8);
        }
    }
}

TEST_CASE("weighted variants") {
    const LeadField& lf = fixtures::coarse_sphere();
    const Matrix y = lf.gain.col(30) * Matrix::Ones(1, 4);
    for (WeightMode mode : {WeightMode::depth, WeightMode::laplacian}) {
        const SourceEstimate est = mne_solve(lf, y, fixed(1e-3, mode));
        CHECK(est.amplitudes.allFinite());
        CHECK(est.amplitudes.rows() == lf.n_columns());
    }
    CHECK(mne_solve(lf, y, fixed(1e-3, WeightMode::depth)).solver_name == "wmne");
    CHECK(mne_solve(lf, y, fixed(1e-3, WeightMode::laplacian)).solver_name == "loreta");

    // Laplacian prior needs a source graph.
    LeadField bare = fixtures::from_gain(fixtures::gaussian(4, 6, 1));
    auto ss = std::make_shared<SourceSpace>(*bare.sources);
    ss->adjacency.clear();
    bare.sources = ss;
    CHECK_THROWS_AS(prior_times_gain_t(bare, WeightMode::laplacian), ConfigError);
    CHECK_THROWS_AS(weight_mode_from_string("tikhonov"), ConfigError);
    CHECK_THROWS_AS(alpha_rule_from_string("gcv"), ConfigError);
}

TEST_CASE("sloreta peaks at a single noiseless source") {
    const LeadField& lf = fixtures::coarse_sphere();
    LinearSolverOptions o;
    for (int j : {0, 17, 60, 101, lf.n_sources() - 1}) {
        const Matrix y = lf.gain.col(j) * Matrix::Ones(1, 3);
        const SourceEstimate est = sloreta_solve(lf, y, o);
        CHECK(argmax_power(est, 1) == j);
        // Positive rescaling of Y leaves the argmax alone.
        CHECK(argmax_power(sloreta_solve(lf, 7.5 * y, o), 1) == j);
    }
}

TEST_CASE("sloreta on free orientations and edge inputs") {
    const LeadField& lf = fixtures::coarse_sphere(3);
    LinearSolverOptions o;
    const int j = 44;
    const Matrix y = lf.block(j) * Vec3(0.3, -0.5, 0.8) * Matrix::Ones(1, 2);
    CHECK(argmax_power(sloreta_solve(lf, y, o), 3) == j);
    CHECK(sloreta_solve(lf, Matrix::Zero(lf.n_electrodes(), 3), o).amplitudes.isZero(0.0));
    Matrix bad = y;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sloreta_solve(lf, bad, o), DataError);
    CHECK_THROWS_AS(sloreta_solve(lf, Matrix::Zero(3, 1), o), ConfigError);
}

TEST_CASE("sloreta is insensitive to rescaling a column with its weight") {
    const LeadField& base = fixtures::coarse_sphere();
    const int j = 25;
    const Matrix y = base.gain.col(j) * Matrix::Ones(1, 2);
    LeadField scaled = base;
    scaled.gain.col(j) *= 3.0;
    scaled.column_weights(j) *= 3.0;
    scaled.normalized = false;
    CHECK(argmax_power(sloreta_solve(scaled, 3.0 * y, fixed(1e-4)), 1) == j);
    CHECK(argmax_power(sloreta_solve(base, y, fixed(1e-4)), 1) == j);
}

TEST_CASE("svd alpha heuristic") {
    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << 2, 1;
    CHECK(alpha_svd_heuristic(fixtures::from_gain(d)) == doctest::Approx(0.04).epsilon(1e-14));

    const Matrix k = fixtures::gaussian(8, 20, 12);
    const double a = alpha_svd_heuristic(fixtures::from_gain(k));
    CHECK(alpha_svd_heuristic(fixtures::from_gain(10.0 * k)) == doctest::Approx(100.0 * a).epsilon(1e-12));

    // Power iteration on K K^T as an independent estimate of s1^2.
    Vector v = Vector::Ones(8);
    double lambda = 0.0;
    for (int i = 0; i < 5000; ++i) {
        const Vector w = k * (k.transpose() * v);
        lambda = w.norm();
        v = w / lambda;
    }
    CHECK(std::abs(a - 0.01 * lambda) <= 1e-9 * a);
}

TEST_CASE("l-curve corner rules") {
    SUBCASE("straight line ties go to the smallest alpha") {
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 6; ++i) pts.emplace_back(i, -2.0 * i);
        CHECK(lcurve_corner(pts) == 1);
    }
    SUBCASE("a sharp knee is found") {
        const std::vector<std::pair<double, double>> pts{{0, 10}, {0.1, 5}, {0.2, 1}, {5, 0.8}, {10, 0.6}};
        CHECK(lcurve_corner(pts) == 2);
    }
    SUBCASE("too few points") {
        CHECK_THROWS_AS(lcurve_corner({{0, 1}, {1, 0}}), ConfigError);
    }
    SUBCASE("grid preconditions") {
        const LeadField lf = fixtures::from_gain(fixtures::gaussian(5, 5, 2));
        const Matrix y = fixtures::gaussian(5, 1, 3);
        try {
            alpha_lcurve(lf, y, std::vector<double>(6, 0.5));
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()) == "degenerate L-curve");
        }
        CHECK_THROWS_AS(alpha_lcurve(lf, y, {1, 2, 3}), ConfigError);
        CHECK_THROWS_AS(alpha_lcurve(lf, y, {5, 4, 3, 2, 1}), ConfigError);
        CHECK_THROWS_AS(alpha_lcurve(lf, y, {0, 1, 2, 3, 4}), ConfigError);
    }
}

TEST_CASE("l-curve avoids both under- and over-regularization") {
    // Discrete Picard condition holds: solution coefficients decay like the singular values.
    const int n = 30;
    Matrix k = fixtures::gaussian(n, n, 77);
    Eigen::JacobiSVD<Matrix> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vector s(n);
    for (int i = 0; i < n; ++i) s(i) = std::pow(10.0, -6.0 * i / (n - 1));
    k = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    const LeadField lf = fixtures::from_gain(k);
    const Vector x_true = svd.matrixV() * s.cwiseProduct(fixtures::gaussian(n, 1, 78));
    const Vector y = k * x_true + 1e-4 * fixtures::gaussian(n, 1, 79);

    std::vector<double> grid;
    for (int i = 0; i < 31; ++i) grid.push_back(std::pow(10.0, -14.0 + 0.5 * i));
    const double chosen = alpha_lcurve(lf, y, grid);
    auto err = [&](double a) { return (mne_solve(lf, y, fixed(a)).amplitudes - x_true).norm(); };
    CHECK(err(chosen) < 0.01 * err(grid.front()));
    CHECK(err(chosen) < 0.5 * err(grid.back()));
}
