#include "sparseloc/solvers_sparse.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/linalg.hpp"
#include "sparseloc/solvers_linear.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace sparseloc {

void validate_options(const SparseSolverOptions& o) {
    if (o.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (!(o.tol > 0.0)) throw ConfigError("tol must be > 0");
    if (!(o.alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(o.wipf_lambda > 0.0)) throw ConfigError("wipf_lambda must be > 0");
    if (!(o.zhang_prune >= 0.0 && o.zhang_prune < 1.0)) throw ConfigError("zhang_prune must be in [0, 1)");
    if (o.reweight_rounds < 0) throw ConfigError("reweight_rounds must be >= 0");
    if (o.baseline_samples < 0) throw ConfigError("baseline_samples must be >= 0");
}

namespace {

void check_input(const LeadField& lf, Eigen::Index rows, bool finite) {
    if (rows != lf.n_electrodes()) throw ConfigError("measurement rows do not match electrode count");
    if (!finite) throw DataError("non-finite measurements");
}

// ---- FOCUSS -------------------------------------------------------------------

Vector focuss_step(const Matrix& k, const Vector& y, const Vector& prev) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < prev.size(); ++i)
        if (prev(i) != 0.0) act.push_back(i);
    Vector x = Vector::Zero(prev.size());
    if (act.empty()) return x;

    const auto n = static_cast<Eigen::Index>(act.size());
    Matrix a(k.rows(), n);
    for (Eigen::Index c = 0; c < n; ++c) a.col(c) = k.col(act[c]) * prev(act[c]);

    Vector q;
    if (n > a.rows()) {
        Matrix g = a * a.transpose();
        q = a.transpose() * (pinv_symmetric(0.5 * (g + g.transpose())) * y);
    } else {
        q = pinv(a) * y;
    }
    for (Eigen::Index c = 0; c < n; ++c) x(act[c]) = prev(act[c]) * q(c);
    return x;
}

// ---- mixed norm ---------------------------------------------------------------

struct BcdResult {
    Matrix x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective;
};

constexpr int kInnerSweeps = 20;

// Minimizes 1/2 |Y - K X|^2 + alpha * sum_j |X_j| by block coordinate descent.
BcdResult mxne_bcd(const Matrix& k, int dof, const Matrix& y, double alpha, int max_iter, double tol) {
    const int m = static_cast<int>(k.cols()) / dof;
    BcdResult out;
    out.x = Matrix::Zero(k.cols(), y.cols());
    Matrix r = y;

    std::vector<double> lip(m);
    for (int j = 0; j < m; ++j) lip[j] = dof == 1 ? k.col(j).squaredNorm() : spectral_norm_sq(k.middleCols(j * dof, dof));

    auto objective = [&] {
        double pen = 0.0;
        for (int j = 0; j < m; ++j) pen += out.x.middleRows(j * dof, dof).norm();
        return 0.5 * r.squaredNorm() + alpha * pen;
    };

    auto sweep = [&](const IndexList& blocks) {
        for (int j : blocks) {
            if (!(lip[j] > 0.0)) continue;
            const auto kj = k.middleCols(j * dof, dof);
            Matrix old = out.x.middleRows(j * dof, dof);
            const Matrix z = old + kj.transpose() * r / lip[j];
            const double nz = z.norm();
            const double shrink = nz > 0.0 ? std::max(0.0, 1.0 - alpha / (lip[j] * nz)) : 0.0;
            if (shrink == 0.0 && old.isZero(0.0)) continue;
            const Matrix upd = z * shrink;
            r.noalias() -= kj * (upd - old);
            out.x.middleRows(j * dof, dof) = upd;
        }
    };
    auto small_change = [&](double before, double after) {
        return std::abs(before - after) <= tol * std::max(std::abs(before), std::numeric_limits<double>::min());
    };

    IndexList all(m);
    for (int j = 0; j < m; ++j) all[j] = j;

    // Full sweeps alternate with cheap sweeps over the current support; only a full
    // sweep can declare convergence.
    double prev = objective();
    out.objective.push_back(prev);
    int it = 0;
    while (it < max_iter) {
        sweep(all);
        const double obj = objective();
        out.objective.push_back(obj);
        out.iterations = ++it;
        if (small_change(prev, obj)) {
            out.converged = true;
            break;
        }
        prev = obj;

        IndexList active;
        for (int j = 0; j < m; ++j)
            if (!out.x.middleRows(j * dof, dof).isZero(0.0)) active.push_back(j);
        for (int inner = 0; inner < kInnerSweeps && it < max_iter && !active.empty(); ++inner) {
            sweep(active);
            const double o = objective();
            out.objective.push_back(o);
            out.iterations = ++it;
            const bool done = small_change(prev, o);
            prev = o;
            if (done) break;
        }
    }
    return out;
}

int block_support(const Matrix& x, int dof) {
    int n = 0;
    for (Eigen::Index j = 0; j < x.rows() / dof; ++j)
        if (!x.middleRows(j * dof, dof).isZero(0.0)) ++n;
    return n;
}

// ---- SBL -------------------------------------------------------------------------

struct Factored {
    Eigen::LLT<Matrix> llt;
    double logdet = 0.0;
};

// Columns of the sources with gamma > 0, and their source indices.
Matrix active_gain(const Matrix& k, int dof, const std::vector<double>& gamma, IndexList& active) {
    active.clear();
    for (std::size_t j = 0; j < gamma.size(); ++j)
        if (gamma[j] > 0.0) active.push_back(static_cast<int>(j));
    Matrix ka(k.rows(), static_cast<Eigen::Index>(active.size()) * dof);
    for (std::size_t a = 0; a < active.size(); ++a)
        ka.middleCols(static_cast<Eigen::Index>(a) * dof, dof) = k.middleCols(static_cast<Eigen::Index>(active[a]) * dof, dof);
    return ka;
}

bool factor(const Matrix& k, int dof, const std::vector<double>& gamma, double sigma2, Factored& f) {
    IndexList active;
    Matrix b = active_gain(k, dof, gamma, active);
    for (std::size_t a = 0; a < active.size(); ++a)
        b.middleCols(static_cast<Eigen::Index>(a) * dof, dof) *= std::sqrt(gamma[active[a]]);
    Matrix s = Matrix::Zero(k.rows(), k.rows());
    s.selfadjointView<Eigen::Lower>().rankUpdate(b);
    s.diagonal().array() += sigma2;
    f.llt.compute(s);
    if (f.llt.info() != Eigen::Success) return false;
    f.logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
    return std::isfinite(f.logdet);
}

// t is the original sample count; y may be a compressed stand-in with the same y y^T.
double cost_of(const Factored& f, const Matrix& y, double t) {
    return f.logdet + f.llt.matrixL().solve(y).squaredNorm() / t;
}

// N x r matrix with the same outer product as y, r = rank(y). Everything SBL
// iterates on depends on y only through y y^T.
Matrix compress_outer(const Matrix& y) {
    if (y.cols() <= y.rows()) return y;
    Eigen::SelfAdjointEigenSolver<Matrix> es(y * y.transpose());
    const Vector& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    IndexList keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > 1e-14 * top) keep.push_back(static_cast<int>(i));
    Matrix out(y.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        out.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));
    return out;
}

double sample_variance(const Matrix& y) {
    if (y.size() < 2) return 0.0;
    const double mean = y.mean();
    return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

} // namespace

FocussResult focuss_solve(const LeadField& lf, const Vector& y, const SparseSolverOptions& opts) {
    validate_options(opts);
    check_input(lf, y.size(), y.allFinite());

    FocussResult res;
    Vector x;
    if (opts.focuss_init == FocussInit::mne) {
        LinearSolverOptions lo;
        x = mne_solve(lf, Matrix(y), lo).amplitudes.col(0);
    } else {
        x = Vector::Ones(lf.n_columns());
    }

    for (int it = 1; it <= opts.max_iter; ++it) {
        Vector next = focuss_step(lf.gain, y, x);
        if (!next.allFinite()) throw SolverError("diverged", it);
        const double peak = next.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < next.size(); ++i)
            if (std::abs(next(i)) < kFocussPrune * peak) next(i) = 0.0;
        const double change = (next - x).norm();
        const double scale = x.norm();
        x = std::move(next);
        res.iterations_used = it;
        if (change <= opts.tol * scale || (scale == 0.0 && change == 0.0)) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    return res;
}

SourceEstimate focuss_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts) {
    validate_options(opts);
    check_input(lf, y.rows(), y.allFinite());
    SourceEstimate est;
    est.amplitudes = Matrix::Zero(lf.n_columns(), y.cols());
    est.converged = true;
    for (Eigen::Index t = 0; t < y.cols(); ++t) {
        FocussResult r = focuss_solve(lf, Vector(y.col(t)), opts);
        est.amplitudes.col(t) = r.x;
        est.iterations_used = std::max(est.iterations_used, r.iterations_used);
        est.converged = est.converged && r.converged;
    }
    est.solver_name = "focuss";
    est.residual_norm = (y - lf.gain * est.amplitudes).norm();
    return est;
}

Matrix prox_l21(const Matrix& x, double threshold, int dof) {
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
    if (dof < 1 || x.rows() % dof != 0) throw ConfigError("row count is not a multiple of dof");
    Matrix out = x;
    for (Eigen::Index j = 0; j < x.rows() / dof; ++j) {
        auto blk = out.middleRows(j * dof, dof);
        const double n = blk.norm();
        if (n == 0.0) continue;
        blk *= std::max(0.0, 1.0 - threshold / n);
    }
    return out;
}

double mxne_alpha_max(const LeadField& lf, const Matrix& y) {
    check_input(lf, y.rows(), y.allFinite());
    const Matrix c = lf.gain.transpose() * y;
    const int dof = lf.dof();
    double best = 0.0;
    for (int j = 0; j < lf.n_sources(); ++j) best = std::max(best, c.middleRows(j * dof, dof).norm());
    return best;
}

SourceEstimate mxne_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts) {
    validate_options(opts);
    check_input(lf, y.rows(), y.allFinite());
    if (!(opts.alpha > 0.0)) throw ConfigError("mxne requires alpha > 0");

    BcdResult r = mxne_bcd(lf.gain, lf.dof(), y, opts.alpha, opts.max_iter, opts.tol);
    SourceEstimate est;
    est.amplitudes = std::move(r.x);
    est.solver_name = "mxne";
    est.iterations_used = r.iterations;
    est.converged = r.converged;
    est.residual_norm = (y - lf.gain * est.amplitudes).norm();
    est.extras.alpha = opts.alpha;
    est.extras.objective_trace = std::move(r.objective);
    est.extras.support_trace = {block_support(est.amplitudes, lf.dof())};
    for (int j = 0; j < lf.n_sources(); ++j)
        if (!est.amplitudes.middleRows(j * lf.dof(), lf.dof()).isZero(0.0)) est.extras.found_indices.push_back(j);
    return est;
}

SourceEstimate irmxne_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts) {
    validate_options(opts);
    check_input(lf, y.rows(), y.allFinite());
    if (!(opts.alpha > 0.0)) throw ConfigError("irmxne requires alpha > 0");
    if (opts.reweight_rounds < 1) throw ConfigError("irmxne requires reweight_rounds >= 1");
    constexpr double eps = 1e-10;

    const int dof = lf.dof();
    const int m = lf.n_sources();
    IndexList support(m);
    for (int j = 0; j < m; ++j) support[j] = j;
    std::vector<double> weight(m, 1.0);
    Matrix x = Matrix::Zero(lf.n_columns(), y.cols());

    SourceEstimate est;
    est.converged = true;
    for (int round = 0; round < opts.reweight_rounds && !support.empty(); ++round) {
        // Weighted penalty alpha * w_j |X_j| == plain penalty on columns scaled by 1/w_j.
        Matrix k(lf.n_electrodes(), static_cast<Eigen::Index>(support.size()) * dof);
        for (std::size_t s = 0; s < support.size(); ++s)
            k.middleCols(static_cast<Eigen::Index>(s) * dof, dof) = lf.block(support[s]) / weight[support[s]];
        BcdResult r = mxne_bcd(k, dof, y, opts.alpha, opts.max_iter, opts.tol);
        est.iterations_used += r.iterations;
        est.converged = est.converged && r.converged;
        est.extras.objective_trace.insert(est.extras.objective_trace.end(), r.objective.begin(), r.objective.end());

        x.setZero();
        IndexList next;
        for (std::size_t s = 0; s < support.size(); ++s) {
            const int j = support[s];
            const Matrix xj = r.x.middleRows(static_cast<Eigen::Index>(s) * dof, dof) / weight[j];
            x.middleRows(static_cast<Eigen::Index>(j) * dof, dof) = xj;
            if (!xj.isZero(0.0)) {
                next.push_back(j);
                weight[j] = 1.0 / (2.0 * std::sqrt(xj.norm() + eps));
            }
        }
        support = std::move(next);
        est.extras.support_trace.push_back(static_cast<int>(support.size()));
    }

    est.amplitudes = std::move(x);
    est.solver_name = "irmxne";
    est.residual_norm = (y - lf.gain * est.amplitudes).norm();
    est.extras.alpha = opts.alpha;
    est.extras.found_indices = support;
    return est;
}

double sbl_cost(const LeadField& lf, const Matrix& y, const std::vector<double>& gamma, double sigma2) {
    if (static_cast<int>(gamma.size()) != lf.n_sources()) throw ConfigError("gamma size does not match source count");
    Factored f;
    if (!factor(lf.gain, lf.dof(), gamma, sigma2, f)) throw SolverError("covariance factorization failed");
    return cost_of(f, y, static_cast<double>(y.cols()));
}

SourceEstimate sbl_solve(const LeadField& lf, const Matrix& y, const SparseSolverOptions& opts) {
    validate_options(opts);
    check_input(lf, y.rows(), y.allFinite());
    if (opts.baseline_samples > y.cols()) throw ConfigError("baseline longer than the measurement window");

    const int dof = lf.dof();
    const int m = lf.n_sources();
    const double n = lf.n_electrodes();
    const double t = static_cast<double>(y.cols());
    const bool zhang = opts.sbl_variant == SblVariant::zhang;
    const Matrix& k = lf.gain;

    SourceEstimate est;
    est.solver_name = zhang ? "sbl_zhang" : "sbl_wipf";
    est.amplitudes = Matrix::Zero(lf.n_columns(), y.cols());
    est.extras.gamma.assign(m, 0.0);

    const double power = y.squaredNorm() / t;
    if (power == 0.0 || m == 0) {
        est.converged = true;
        return est;
    }

    double sigma2;
    if (zhang) {
        sigma2 = opts.baseline_samples >= 2 ? sample_variance(y.leftCols(opts.baseline_samples))
                                            : 1e-2 * sample_variance(y);
    } else {
        sigma2 = opts.wipf_lambda * power / n;
    }
    if (!(sigma2 > 0.0)) sigma2 = 1e-2 * power / n;
    est.extras.noise_variance = sigma2;

    std::vector<double> gamma(m, power / k.squaredNorm());
    const int max_iter = zhang ? std::min(opts.max_iter, kZhangMaxIter) : opts.max_iter;

    Factored f;
    if (!factor(k, dof, gamma, sigma2, f)) throw SolverError("covariance factorization failed", 0);
    const Matrix yc = compress_outer(y);
    est.extras.objective_trace.push_back(cost_of(f, yc, t));

    for (int it = 1; it <= max_iter; ++it) {
        IndexList active;
        const Matrix wa = f.llt.matrixL().solve(active_gain(k, dof, gamma, active));
        const Matrix ky = wa.transpose() * f.llt.matrixL().solve(yc);
        const Vector tr_cols = wa.colwise().squaredNorm().transpose();
        std::vector<double> next(m, 0.0);
        double gmax = 0.0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int j = active[a];
            const auto r = static_cast<Eigen::Index>(a) * dof;
            const double g = gamma[j];
            const double tr = tr_cols.segment(r, dof).sum();
            const double kyn2 = ky.middleRows(r, dof).squaredNorm();
            if (zhang) next[j] = g * g * kyn2 / (dof * t) + g - g * g * tr / dof;
            else next[j] = tr > 0.0 ? g * std::sqrt(kyn2) / std::sqrt(t * tr) : 0.0;
            next[j] = std::max(next[j], 0.0);
            gmax = std::max(gmax, next[j]);
        }
        if (!std::isfinite(gmax)) throw SolverError("diverged", it);

        // The EM step never raises the cost; pruning can. Prune only when it does not,
        // otherwise keep the plain EM step and try again next iteration.
        double cost = 0.0;
        bool pruned = false;
        if (zhang) {
            std::vector<double> cut = next;
            for (double& g : cut)
                if (g > 0.0 && g < opts.zhang_prune * gmax) g = 0.0, pruned = true;
            if (pruned) {
                Factored fc;
                if (factor(k, dof, cut, sigma2, fc) &&
                    (cost = cost_of(fc, yc, t)) <= est.extras.objective_trace.back()) {
                    next = std::move(cut);
                    f = std::move(fc);
                } else {
                    pruned = false;
                }
            }
        }

        double change = 0.0;
        for (int j = 0; j < m; ++j) change = std::max(change, std::abs(next[j] - gamma[j]));
        gamma = std::move(next);
        if (!pruned) {
            if (!factor(k, dof, gamma, sigma2, f)) throw SolverError("covariance factorization failed", it);
            cost = cost_of(f, yc, t);
        }
        est.extras.objective_trace.push_back(cost);
        est.iterations_used = it;
        if (gmax == 0.0 || change <= opts.tol * gmax) {
            est.converged = true;
            break;
        }
        est.converged = false;
    }

    const Matrix sy = f.llt.solve(y);
    for (int j = 0; j < m; ++j) {
        if (gamma[j] == 0.0) continue;
        const auto r = static_cast<Eigen::Index>(j) * dof;
        est.amplitudes.middleRows(r, dof) = gamma[j] * k.middleCols(r, dof).transpose() * sy;
    }
    if (!est.amplitudes.allFinite()) throw SolverError("diverged", est.iterations_used);
    est.extras.gamma = std::move(gamma);
    est.residual_norm = (y - k * est.amplitudes).norm();
    return est;
}

} // namespace sparseloc
