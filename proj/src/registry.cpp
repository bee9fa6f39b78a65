#include "sparseloc/registry.hpp"

#include "sparseloc/errors.hpp"
#include "sparseloc/scanners.hpp"
#include "sparseloc/solvers_linear.hpp"
#include "sparseloc/solvers_sparse.hpp"

#include <algorithm>
#include <set>

namespace sparseloc {

const std::vector<std::string>& solver_names() {
    static const std::vector<std::string> names{"mne",      "wmne",      "loreta",     "sloreta",   "focuss",
                                                "mxne",     "irmxne",    "sbl_wipf",   "sbl_zhang", "trap_music",
                                                "rap_music", "vbsccd",   "sissy"};
    return names;
}

namespace {

using json = nlohmann::json;

void allow_only(const std::string& solver, const json& p, std::initializer_list<const char*> keys) {
    if (!p.is_object()) throw ConfigError("parameters of '" + solver + "' must be an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [key, val] : p.items())
        if (!ok.count(key)) throw ConfigError("unknown parameter '" + key + "' for solver '" + solver + "'");
}

template <class T>
T get_or(const json& p, const char* key, T fallback) {
    if (!p.contains(key)) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("parameter '") + key + "' has the wrong type");
    }
}

LinearSolverOptions linear_options(const json& p, WeightMode mode) {
    LinearSolverOptions o;
    o.weight_mode = p.contains("weight_mode") ? weight_mode_from_string(get_or<std::string>(p, "weight_mode", "")) : mode;
    if (p.contains("alpha")) {
        o.alpha_rule = AlphaRule::fixed;
        o.alpha = get_or<double>(p, "alpha", 0.0);
    } else if (p.contains("alpha_rule")) {
        o.alpha_rule = alpha_rule_from_string(get_or<std::string>(p, "alpha_rule", ""));
    }
    o.lcurve_grid = get_or<std::vector<double>>(p, "lcurve_grid", {});
    return o;
}

SparseSolverOptions sparse_common(const json& p, int max_iter, double tol) {
    SparseSolverOptions o;
    o.max_iter = get_or<int>(p, "max_iter", max_iter);
    o.tol = get_or<double>(p, "tol", tol);
    return o;
}

} // namespace

SolverFn make_solver(const std::string& name, const json& params, int baseline_samples) {
    const json& p = params.is_null() ? json::object() : params;

    if (name == "mne" || name == "wmne" || name == "loreta") {
        allow_only(name, p, {"alpha", "alpha_rule", "lcurve_grid"});
        const WeightMode mode = name == "mne" ? WeightMode::identity : name == "wmne" ? WeightMode::depth : WeightMode::laplacian;
        const LinearSolverOptions o = linear_options(p, mode);
        return [o](const LeadField& lf, const Matrix& y) { return mne_solve(lf, y, o); };
    }
    if (name == "sloreta") {
        allow_only(name, p, {"alpha", "alpha_rule", "lcurve_grid", "weight_mode"});
        const LinearSolverOptions o = linear_options(p, WeightMode::identity);
        return [o](const LeadField& lf, const Matrix& y) { return sloreta_solve(lf, y, o); };
    }
    if (name == "focuss") {
        allow_only(name, p, {"max_iter", "tol", "init"});
        SparseSolverOptions o = sparse_common(p, 100, 1e-6);
        const auto init = get_or<std::string>(p, "init", "uniform");
        if (init == "uniform") o.focuss_init = FocussInit::uniform;
        else if (init == "mne") o.focuss_init = FocussInit::mne;
        else throw ConfigError("unknown FOCUSS init '" + init + "'");
        validate_options(o);
        return [o](const LeadField& lf, const Matrix& y) { return focuss_solve(lf, y, o); };
    }
    if (name == "mxne" || name == "irmxne") {
        allow_only(name, p, {"alpha", "alpha_fraction", "max_iter", "tol", "reweight_rounds"});
        if (name == "mxne" && p.contains("reweight_rounds"))
            throw ConfigError("unknown parameter 'reweight_rounds' for solver 'mxne'");
        SparseSolverOptions o = sparse_common(p, 1000, 1e-6);
        o.reweight_rounds = get_or<int>(p, "reweight_rounds", 3);
        const bool absolute = p.contains("alpha");
        const double value = absolute ? get_or<double>(p, "alpha", 0.0) : get_or<double>(p, "alpha_fraction", 0.2);
        if (!(value > 0.0)) throw ConfigError("mixed-norm alpha must be > 0");
        if (!absolute && !(value < 1.0)) throw ConfigError("alpha_fraction must be in (0, 1)");
        validate_options(o);
        const bool re = name == "irmxne";
        return [o, absolute, value, re](const LeadField& lf, const Matrix& y) {
            SparseSolverOptions run = o;
            run.alpha = absolute ? value : value * mxne_alpha_max(lf, y);
            if (!(run.alpha > 0.0)) {
                SourceEstimate zero;
                zero.amplitudes = Matrix::Zero(lf.n_columns(), y.cols());
                zero.solver_name = re ? "irmxne" : "mxne";
                return zero;
            }
            return re ? irmxne_solve(lf, y, run) : mxne_solve(lf, y, run);
        };
    }
    if (name == "sbl_wipf" || name == "sbl_zhang") {
        const bool zhang = name == "sbl_zhang";
        if (zhang) allow_only(name, p, {"max_iter", "tol", "prune"});
        else allow_only(name, p, {"max_iter", "tol", "lambda"});
        SparseSolverOptions o = sparse_common(p, zhang ? kZhangMaxIter : 300, 1e-6);
        o.sbl_variant = zhang ? SblVariant::zhang : SblVariant::wipf;
        o.wipf_lambda = get_or<double>(p, "lambda", 0.2);
        o.zhang_prune = get_or<double>(p, "prune", 1e-3);
        o.baseline_samples = baseline_samples;
        validate_options(o);
        return [o](const LeadField& lf, const Matrix& y) {
            SparseSolverOptions run = o;
            run.baseline_samples = std::min<int>(run.baseline_samples, static_cast<int>(y.cols()));
            return sbl_solve(lf, y, run);
        };
    }
    if (name == "trap_music" || name == "rap_music") {
        allow_only(name, p, {"drop_factor", "n_tilde"});
        ScanOptions o;
        o.truncate = name == "trap_music";
        o.drop_factor = get_or<double>(p, "drop_factor", 0.5);
        std::optional<int> hint;
        if (p.contains("n_tilde")) hint = get_or<int>(p, "n_tilde", 0);
        return [o, hint](const LeadField& lf, const Matrix& y) { return trap_music_solve(lf, y, o, hint); };
    }
    if (name == "vbsccd" || name == "sissy") {
        const bool sissy = name == "sissy";
        if (sissy) allow_only(name, p, {"lambda", "lambda_fraction", "alpha", "rho", "max_iter", "tol"});
        else allow_only(name, p, {"lambda", "lambda_fraction", "rho", "max_iter", "tol"});
        SissyOptions o;
        o.alpha = sissy ? get_or<double>(p, "alpha", 0.1) : 0.0;
        o.rho = get_or<double>(p, "rho", 0.0);
        o.max_iter = get_or<int>(p, "max_iter", 300);
        o.tol = get_or<double>(p, "tol", 1e-4);
        const bool absolute = p.contains("lambda");
        const double value = absolute ? get_or<double>(p, "lambda", 0.0) : get_or<double>(p, "lambda_fraction", 0.05);
        if (!(value > 0.0)) throw ConfigError("lambda must be > 0");
        return [o, absolute, value](const LeadField& lf, const Matrix& y) {
            SissyOptions run = o;
            run.lambda = absolute ? value : value * (lf.gain.transpose() * y).cwiseAbs().maxCoeff();
            if (!(run.lambda > 0.0)) {
                SourceEstimate zero;
                zero.amplitudes = Matrix::Zero(lf.n_columns(), y.cols());
                zero.solver_name = run.alpha > 0.0 ? "sissy" : "vbsccd";
                return zero;
            }
            return sissy_solve(lf, y, variation_operator(*lf.sources), run);
        };
    }
    throw ConfigError("unknown solver '" + name + "'");
}

} // namespace sparseloc
