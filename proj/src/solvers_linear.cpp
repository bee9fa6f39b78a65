#include "sparseloc/solvers_linear.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <set>

namespace sparseloc {

WeightMode weight_mode_from_string(const std::string& s) {
    if (s == "identity") return WeightMode::identity;
    if (s == "depth") return WeightMode::depth;
    if (s == "laplacian") return WeightMode::laplacian;
    throw ConfigError("unknown weight mode '" + s + "'");
}

AlphaRule alpha_rule_from_string(const std::string& s) {
    if (s == "fixed") return AlphaRule::fixed;
    if (s == "svd_heuristic") return AlphaRule::svd_heuristic;
    if (s == "l_curve") return AlphaRule::l_curve;
    throw ConfigError("unknown alpha rule '" + s + "'");
}

namespace {

void check_input(const LeadField& lf, const Matrix& y) {
    if (y.rows() != lf.n_electrodes()) throw ConfigError("measurement rows do not match electrode count");
    if (!y.allFinite()) throw DataError("non-finite measurements");
}

double top_eigenvalue(const Matrix& sym) {
    if (sym.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

Matrix laplacian_prior_times_gain_t(const LeadField& lf) {
    const SourceSpace& ss = *lf.sources;
    if (static_cast<int>(ss.adjacency.size()) != ss.size())
        throw ConfigError("Laplacian weighting requires source adjacency");
    const int dof = lf.dof();
    const Eigen::Index n = lf.n_columns();

    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trips;
    for (int j = 0; j < ss.size(); ++j) {
        const auto deg = static_cast<double>(ss.adjacency[j].size());
        for (int c = 0; c < dof; ++c) {
            const int row = dof * j + c;
            trips.emplace_back(row, row, deg);
            for (int k : ss.adjacency[j]) trips.emplace_back(row, dof * k + c, -1.0);
        }
    }
    Eigen::SparseMatrix<double> lap(n, n);
    lap.setFromTriplets(trips.begin(), trips.end());

    Vector omega = lf.gain.colwise().norm().transpose();
    Eigen::SparseMatrix<double> w = omega.asDiagonal() * Eigen::SparseMatrix<double>(lap.transpose() * lap) *
                                    omega.asDiagonal();
    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, w.coeff(i, i));
    const double loading = 1e-10 * (max_diag > 0.0 ? max_diag : 1.0);
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    w += loading * eye;
    w.makeCompressed();

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(w);
    if (ldlt.info() != Eigen::Success) throw SolverError("Laplacian weight factorization failed");
    Matrix kt = lf.gain.transpose();
    Matrix out = ldlt.solve(kt);
    if (ldlt.info() != Eigen::Success || !out.allFinite()) throw SolverError("Laplacian weight solve failed");
    return out;
}

} // namespace

Matrix prior_times_gain_t(const LeadField& lf, WeightMode mode) {
    switch (mode) {
    case WeightMode::identity: return lf.gain.transpose();
    case WeightMode::depth: {
        Vector inv = lf.gain.colwise().squaredNorm().transpose();
        for (Eigen::Index i = 0; i < inv.size(); ++i) {
            if (!(inv(i) > 0.0)) throw DataError("zero lead-field column under depth weighting");
            inv(i) = 1.0 / inv(i);
        }
        return inv.asDiagonal() * lf.gain.transpose();
    }
    case WeightMode::laplacian: return laplacian_prior_times_gain_t(lf);
    }
    return lf.gain.transpose();
}

double alpha_svd_heuristic(const LeadField& lf) {
    if (!lf.gain.allFinite()) throw DataError("non-finite lead field");
    return 0.01 * spectral_norm_sq(lf.gain);
}

std::size_t lcurve_corner(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw ConfigError("degenerate L-curve");
    std::vector<double> kappa(points.size(), -INFINITY);
    double best = -INFINITY;
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
        const auto [ax, ay] = points[i - 1];
        const auto [bx, by] = points[i];
        const auto [cx, cy] = points[i + 1];
        const double cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        const double ab = std::hypot(bx - ax, by - ay);
        const double bc = std::hypot(cx - bx, cy - by);
        const double ac = std::hypot(cx - ax, cy - ay);
        const double denom = ab * bc * ac;
        kappa[i] = denom > 0.0 ? 2.0 * cross / denom : 0.0;
        best = std::max(best, kappa[i]);
    }
    const double slack = 1e-12 * std::max(1.0, std::abs(best));
    for (std::size_t i = 1; i + 1 < points.size(); ++i)
        if (kappa[i] >= best - slack) return i;
    return 1;
}

double alpha_lcurve(const LeadField& lf, const Matrix& y, const std::vector<double>& grid, WeightMode mode) {
    check_input(lf, y);
    if (grid.size() < 5) throw ConfigError("L-curve grid needs at least 5 values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ConfigError("L-curve grid values must be positive");
        if (i && grid[i] < grid[i - 1]) throw ConfigError("L-curve grid must be sorted ascending");
    }

    const Matrix pkt = prior_times_gain_t(lf, mode);
    const Matrix gram = lf.gain * pkt;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Matrix& v = es.eigenvectors();
    const Vector& ev = es.eigenvalues();
    const Matrix vy = v.transpose() * y;

    std::vector<std::pair<double, double>> pts;
    std::vector<double> alphas;
    for (double a : grid) {
        const double top = (ev.array() + a).abs().maxCoeff();
        Vector inv = Vector::Zero(ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (std::abs(ev(i) + a) > kRankCutoff * top) inv(i) = 1.0 / (ev(i) + a);
        const Matrix z = v * (inv.asDiagonal() * vy);
        const Matrix x = pkt * z;
        const double res = (y - lf.gain * x).norm();
        const double sol = x.norm();
        const std::pair<double, double> p{std::log(std::max(res, 1e-300)), std::log(std::max(sol, 1e-300))};
        if (!pts.empty() && std::abs(p.first - pts.back().first) <= 1e-12 &&
            std::abs(p.second - pts.back().second) <= 1e-12)
            continue;
        pts.push_back(p);
        alphas.push_back(a);
    }
    if (pts.size() < 3) throw ConfigError("degenerate L-curve");
    return alphas[lcurve_corner(pts)];
}

double resolve_alpha(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts) {
    switch (opts.alpha_rule) {
    case AlphaRule::fixed:
        if (!(opts.alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
        return opts.alpha;
    case AlphaRule::svd_heuristic: {
        if (opts.weight_mode == WeightMode::identity) return alpha_svd_heuristic(lf);
        const Matrix gram = lf.gain * prior_times_gain_t(lf, opts.weight_mode);
        return 0.01 * top_eigenvalue(0.5 * (gram + gram.transpose()));
    }
    case AlphaRule::l_curve: {
        std::vector<double> grid = opts.lcurve_grid;
        if (grid.empty()) {
            const Matrix gram = lf.gain * prior_times_gain_t(lf, opts.weight_mode);
            const double top = top_eigenvalue(0.5 * (gram + gram.transpose()));
            for (int i = 0; i < 15; ++i) grid.push_back(top * std::pow(10.0, -6.0 + 0.5 * i));
        }
        return alpha_lcurve(lf, y, grid, opts.weight_mode);
    }
    }
    return 0.0;
}

SourceEstimate mne_solve(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts) {
    check_input(lf, y);
    const double alpha = resolve_alpha(lf, y, opts);
    const Matrix pkt = prior_times_gain_t(lf, opts.weight_mode);
    Matrix g = lf.gain * pkt;
    g = 0.5 * (g + g.transpose());
    g.diagonal().array() += alpha;

    SourceEstimate est;
    est.amplitudes = pkt * (pinv_symmetric(g) * y);
    est.solver_name = opts.weight_mode == WeightMode::identity ? "mne"
                      : opts.weight_mode == WeightMode::depth  ? "wmne"
                                                               : "loreta";
    est.iterations_used = 1;
    est.converged = true;
    est.residual_norm = (y - lf.gain * est.amplitudes).norm();
    est.extras.alpha = alpha;
    return est;
}

SourceEstimate sloreta_solve(const LeadField& lf, const Matrix& y, const LinearSolverOptions& opts) {
    check_input(lf, y);
    const double alpha = resolve_alpha(lf, y, opts);
    const Eigen::Index n = lf.n_electrodes();
    const Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix pkt = prior_times_gain_t(lf, opts.weight_mode);

    Matrix c = h * lf.gain * pkt * h + alpha * h;
    c = 0.5 * (c + c.transpose());
    const Matrix t = pkt * (h * pinv_symmetric(c));
    const Matrix x = t * y;

    const int dof = lf.dof();
    SourceEstimate est;
    est.amplitudes.resize(x.rows(), x.cols());
    for (int j = 0; j < lf.n_sources(); ++j) {
        const Eigen::Index r = static_cast<Eigen::Index>(j) * dof;
        // Diagonal block of T K W^-1 = T (W^-1 K^T)^T.
        const Matrix s = t.middleRows(r, dof) * pkt.middleRows(r, dof).transpose();
        const Matrix sym = 0.5 * (s + s.transpose());
        if (dof == 1) {
            const double v = sym(0, 0);
            est.amplitudes.row(r) = x.row(r) * (v > 0.0 ? 1.0 / std::sqrt(v) : 0.0);
        } else {
            est.amplitudes.middleRows(r, dof) = inv_sqrt_psd(sym) * x.middleRows(r, dof);
        }
    }
    est.solver_name = "sloreta";
    est.iterations_used = 1;
    est.converged = true;
    est.residual_norm = (y - lf.gain * x).norm();
    est.extras.alpha = alpha;
    return est;
}

} // namespace sparseloc
