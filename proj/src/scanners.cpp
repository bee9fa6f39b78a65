#include "sparseloc/scanners.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sparseloc {

SubspaceModel estimate_signal_subspace(const Matrix& y, std::optional<int> n_tilde_hint) {
    if (!y.allFinite()) throw DataError("non-finite measurements");
    const Eigen::Index n = y.rows();
    if (n == 0 || y.isZero(0.0)) throw DataError("empty signal");

    Eigen::SelfAdjointEigenSolver<Matrix> es(y * y.transpose());
    if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed");
    const Vector ev = es.eigenvalues().reverse();
    const Matrix vec = es.eigenvectors().rowwise().reverse();
    if (!(ev(0) > 0.0)) throw DataError("empty signal");

    SubspaceModel sub;
    sub.eigenvalues = ev;
    sub.n_est = static_cast<int>((ev.array() >= kSignalEigenRatio * ev(0)).count());
    if (n_tilde_hint) {
        if (*n_tilde_hint < 1) throw ConfigError("n_tilde hint must be >= 1");
        sub.n_tilde = *n_tilde_hint;
    } else {
        sub.n_tilde = sub.n_est + 2;
    }
    sub.n_tilde = std::min<int>(sub.n_tilde, static_cast<int>(n));
    sub.us = vec.leftCols(sub.n_tilde);
    // Directions of numerically zero eigenvalues are arbitrary, not noise; they carry nothing.
    for (Eigen::Index c = 0; c < sub.n_tilde; ++c)
        if (ev(c) <= kRankCutoff * ev(0)) sub.us.col(c).setZero();
    sub.short_window = y.cols() < n;
    return sub;
}

namespace {

// Orthonormal basis of the column space of a (N x dof) block plus the map back to
// block coefficients: a * coef.col(i) == basis.col(i).
struct BlockBasis {
    Matrix basis;
    Matrix coef;
};

BlockBasis block_basis(const Matrix& a) {
    BlockBasis out;
    if (a.cols() == 1) {
        const double n = a.norm();
        out.basis = a / n;
        out.coef = Matrix::Constant(1, 1, 1.0 / n);
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > kRankCutoff * s(0)) ++r;
    out.basis = svd.matrixU().leftCols(r);
    out.coef = svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
    return out;
}

constexpr double kProjectedOut = 1e-10;

} // namespace

Vector music_localizer(const LeadField& lf, const Matrix& q, const Matrix& r_basis) {
    const int dof = lf.dof();
    Vector mu = Vector::Zero(lf.n_sources());
    const Matrix qk = q * lf.gain;
    const Matrix rqk = r_basis.transpose() * qk;
    for (int j = 0; j < lf.n_sources(); ++j) {
        const auto r = static_cast<Eigen::Index>(j) * dof;
        const double kn = lf.gain.middleCols(r, dof).norm();
        const double qn = qk.middleCols(r, dof).norm();
        if (!(kn > 0.0) || qn <= kProjectedOut * kn) continue;
        if (dof == 1) {
            mu(j) = rqk.col(r).norm() / qn;
        } else {
            const BlockBasis bb = block_basis(qk.middleCols(r, dof));
            if (bb.basis.cols() == 0) continue;
            Eigen::JacobiSVD<Matrix> svd(r_basis.transpose() * bb.basis);
            mu(j) = svd.singularValues()(0);
        }
        mu(j) = std::min(mu(j), 1.0);
    }
    return mu;
}

ScanResult trap_music(const LeadField& lf, const SubspaceModel& sub, const ScanOptions& opts) {
    if (sub.us.rows() != lf.n_electrodes() || sub.us.cols() != sub.n_tilde || sub.n_tilde < 1)
        throw ConfigError("signal subspace does not match the lead field");
    if (!(opts.drop_factor >= 0.0 && opts.drop_factor <= 1.0)) throw ConfigError("drop_factor must be in [0, 1]");

    const int dof = lf.dof();
    const Eigen::Index n = lf.n_electrodes();
    ScanResult res;
    Matrix b(n, 0);
    Matrix q = Matrix::Identity(n, n);

    for (int i = 1; i <= sub.n_tilde; ++i) {
        if (b.cols() > 0) q = Matrix::Identity(n, n) - b * pinv(b);

        Eigen::JacobiSVD<Matrix> svd(q * sub.us, Eigen::ComputeThinU);
        const Vector& s = svd.singularValues();
        Eigen::Index keep = 0;
        while (keep < s.size() && s(keep) > kRankCutoff * std::max(s(0), 1.0)) ++keep;
        if (opts.truncate) keep = std::min<Eigen::Index>(keep, sub.n_tilde - i + 1);
        if (keep == 0) {
            if (i == 1) throw SolverError("degenerate projection", i);
            res.trace.push_back(0.0); // nothing left to scan
            break;
        }
        const Matrix r_basis = svd.matrixU().leftCols(keep);

        Vector mu = music_localizer(lf, q, r_basis);
        for (int f : res.found) mu(f) = 0.0;
        Eigen::Index best = 0;
        const double top = mu.maxCoeff(&best);
        if (!(top > 0.0)) {
            if (i == 1) throw SolverError("degenerate projection", i);
            break;
        }
        res.trace.push_back(top);
        if (i > 1 && top < opts.drop_factor * res.trace.front()) break;
        res.found.push_back(static_cast<int>(best));

        const Matrix kb = lf.block(static_cast<int>(best));
        if (dof == 1) {
            b.conservativeResize(n, b.cols() + 1);
            b.col(b.cols() - 1) = kb;
        } else {
            // Oriented topography: the block direction that maximizes the localizer.
            const BlockBasis bb = block_basis(q * kb);
            Eigen::JacobiSVD<Matrix> s2(r_basis.transpose() * bb.basis, Eigen::ComputeThinV);
            const Vector orient = bb.coef * s2.matrixV().col(0);
            b.conservativeResize(n, b.cols() + 1);
            b.col(b.cols() - 1) = kb * orient;
        }
    }
    return res;
}

SourceEstimate trap_music_solve(const LeadField& lf, const Matrix& y, const ScanOptions& opts,
                                std::optional<int> n_tilde_hint) {
    if (y.rows() != lf.n_electrodes()) throw ConfigError("measurement rows do not match electrode count");
    const SubspaceModel sub = estimate_signal_subspace(y, n_tilde_hint);
    ScanResult scan = trap_music(lf, sub, opts);

    const int dof = lf.dof();
    SourceEstimate est;
    est.amplitudes = Matrix::Zero(lf.n_columns(), y.cols());
    if (!scan.found.empty()) {
        Matrix k(lf.n_electrodes(), static_cast<Eigen::Index>(scan.found.size()) * dof);
        for (std::size_t s = 0; s < scan.found.size(); ++s)
            k.middleCols(static_cast<Eigen::Index>(s) * dof, dof) = lf.block(scan.found[s]);
        const Matrix xs = pinv(k) * y;
        for (std::size_t s = 0; s < scan.found.size(); ++s)
            est.amplitudes.middleRows(static_cast<Eigen::Index>(scan.found[s]) * dof, dof) =
                xs.middleRows(static_cast<Eigen::Index>(s) * dof, dof);
    }
    est.solver_name = opts.truncate ? "trap_music" : "rap_music";
    est.iterations_used = static_cast<int>(scan.trace.size());
    est.converged = true;
    est.residual_norm = (y - lf.gain * est.amplitudes).norm();
    est.extras.found_indices = scan.found;
    est.extras.localizer_trace = scan.trace;
    return est;
}

VariationOperator variation_operator(const SourceSpace& ss) {
    if (static_cast<int>(ss.adjacency.size()) != ss.size()) throw ConfigError("variation operator needs source adjacency");
    VariationOperator op;
    op.n_sources = ss.size();
    op.dof = ss.dof;
    for (int i = 0; i < ss.size(); ++i)
        for (int j : ss.adjacency[i])
            if (i < j) op.edges.emplace_back(i, j);
    std::sort(op.edges.begin(), op.edges.end());
    op.edges.erase(std::unique(op.edges.begin(), op.edges.end()), op.edges.end());

    const int dof = ss.dof;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(op.edges.size() * 2 * dof);
    for (std::size_t e = 0; e < op.edges.size(); ++e) {
        for (int c = 0; c < dof; ++c) {
            const auto row = static_cast<int>(e) * dof + c;
            trips.emplace_back(row, op.edges[e].first * dof + c, 1.0);
            trips.emplace_back(row, op.edges[e].second * dof + c, -1.0);
        }
    }
    op.v.resize(static_cast<Eigen::Index>(op.edges.size()) * dof, static_cast<Eigen::Index>(ss.size()) * dof);
    op.v.setFromTriplets(trips.begin(), trips.end());
    op.v.makeCompressed();
    return op;
}

double sissy_objective(const LeadField& lf, const Matrix& y, const VariationOperator& vop, double lambda,
                       double alpha, const Matrix& x) {
    const Matrix vx = vop.v * x;
    return 0.5 * (y - lf.gain * x).squaredNorm() + lambda * (vx.cwiseAbs().sum() + alpha * x.cwiseAbs().sum());
}

namespace {

Matrix soft(const Matrix& a, double t) {
    return a.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

} // namespace

SourceEstimate sissy_solve(const LeadField& lf, const Matrix& y, const VariationOperator& vop,
                           const SissyOptions& opts) {
    if (y.rows() != lf.n_electrodes()) throw ConfigError("measurement rows do not match electrode count");
    if (!y.allFinite()) throw DataError("non-finite measurements");
    if (!(opts.lambda > 0.0)) throw ConfigError("lambda must be > 0");
    if (!(opts.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (opts.max_iter < 1 || !(opts.tol > 0.0)) throw ConfigError("invalid iteration settings");
    if (vop.v.cols() != lf.n_columns()) throw ConfigError("variation operator does not match the lead field");

    const Matrix& k = lf.gain;
    const Eigen::Index n = lf.n_columns();
    const double rho = opts.rho > 0.0 ? opts.rho : std::max(spectral_norm_sq(k) / 10.0, 1e-12);

    // (K^T K + A)^-1 with A = rho (V^T V + I) by Woodbury around a sparse factorization of A.
    Eigen::SparseMatrix<double> a = Eigen::SparseMatrix<double>(vop.v.transpose() * vop.v);
    Eigen::SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    a = rho * (a + eye);
    a.makeCompressed();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw SolverError("ADMM factorization failed");
    const Matrix akt = ldlt.solve(Matrix(k.transpose()));
    Matrix small = k * akt;
    small.diagonal().array() += 1.0;
    const Eigen::LLT<Matrix> cap(0.5 * (small + small.transpose()));
    if (cap.info() != Eigen::Success) throw SolverError("ADMM factorization failed");

    const Matrix kty = k.transpose() * y;
    Matrix x = Matrix::Zero(n, y.cols());
    Matrix z = Matrix::Zero(vop.v.rows(), y.cols());
    Matrix w = Matrix::Zero(n, y.cols());
    Matrix uz = z, uw = w;

    const bool sparse_out = opts.alpha > 0.0;
    Matrix best = x;
    double best_obj = sissy_objective(lf, y, vop, opts.lambda, opts.alpha, best);

    SourceEstimate est;
    est.extras.objective_trace.push_back(best_obj);
    est.converged = false;
    const double tz = opts.lambda / rho;
    const double tw = opts.lambda * opts.alpha / rho;
    const double scale = std::sqrt(static_cast<double>(n * y.cols()));

    for (int it = 1; it <= opts.max_iter; ++it) {
        const Matrix rhs = kty + rho * (vop.v.transpose() * (z - uz) + (w - uw));
        const Matrix arhs = ldlt.solve(rhs);
        x = arhs - akt * cap.solve(k * arhs);
        if (!x.allFinite()) throw SolverError("diverged", it);

        const Matrix vx = vop.v * x;
        const Matrix z_old = z, w_old = w;
        z = soft(vx + uz, tz);
        w = soft(x + uw, tw);
        uz += vx - z;
        uw += x - w;

        const Matrix& cand = sparse_out ? w : x;
        const double obj = sissy_objective(lf, y, vop, opts.lambda, opts.alpha, cand);
        if (obj < best_obj) {
            best_obj = obj;
            best = cand;
        }
        est.extras.objective_trace.push_back(best_obj);
        est.iterations_used = it;

        const double primal = std::sqrt((vx - z).squaredNorm() + (x - w).squaredNorm());
        const double dual = rho * std::sqrt((vop.v.transpose() * (z - z_old)).squaredNorm() + (w - w_old).squaredNorm());
        const double eps_p = 1e-12 * scale + opts.tol * std::max({vx.norm(), z.norm(), x.norm()});
        const double eps_d = 1e-12 * scale + opts.tol * rho * std::sqrt(uz.squaredNorm() + uw.squaredNorm());
        if (primal <= eps_p && dual <= eps_d) {
            est.converged = true;
            break;
        }
    }

    est.amplitudes = std::move(best);
    est.solver_name = sparse_out ? "sissy" : "vbsccd";
    est.residual_norm = (y - k * est.amplitudes).norm();
    est.extras.alpha = opts.alpha;
    return est;
}

IndexList automatic_threshold(const Vector& map, const Adjacency& adjacency, double keep_fraction) {
    const auto m = static_cast<int>(map.size());
    if (static_cast<int>(adjacency.size()) != m) throw ConfigError("adjacency does not match the amplitude map");
    if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction must be in [0, 1]");
    if (!map.allFinite()) throw DataError("non-finite amplitude map");
    const double gmax = m ? map.maxCoeff() : 0.0;
    if (!(gmax > 0.0)) return {};

    IndexList order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return map(a) > map(b); });

    std::vector<int> label(m, -1);
    std::vector<int> parent;
    std::vector<double> peak;
    auto find = [&](int l) {
        while (parent[l] != l) l = parent[l] = parent[parent[l]];
        return l;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (peak[b] > peak[a]) std::swap(a, b);
        parent[b] = a;
    };
    const double flat = 1e-12 * gmax;

    for (int i : order) {
        if (!(map(i) > 0.0)) break;
        int best_nb = -1;
        std::vector<int> roots;
        for (int nb : adjacency[i]) {
            if (label[nb] < 0) continue;
            roots.push_back(find(label[nb]));
            if (best_nb < 0 || map(nb) > map(best_nb)) best_nb = nb;
        }
        if (best_nb < 0) {
            label[i] = static_cast<int>(parent.size());
            parent.push_back(label[i]);
            peak.push_back(map(i));
            continue;
        }
        label[i] = find(label[best_nb]);
        // Regions meeting at a level equal to the lower peak have no distinct extremum.
        for (int r : roots)
            if (peak[find(r)] - map(i) <= flat) unite(label[i], r);
    }

    IndexList kept;
    for (int i = 0; i < m; ++i)
        if (label[i] >= 0 && peak[find(label[i])] >= keep_fraction * gmax) kept.push_back(i);
    return kept;
}

} // namespace sparseloc
