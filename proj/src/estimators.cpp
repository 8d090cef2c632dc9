#include "adlab/estimators.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"

#include "adlab/errors.hpp"
#include "adlab/stats.hpp"

namespace adlab {

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

TargetSpec TargetSpec::make(Vector nu, std::string label) {
    if (nu.empty()) throw InvalidSpec("TargetSpec: nu is empty");
    for (double v : nu)
        if (!std::isfinite(v)) throw InvalidSpec("TargetSpec: nu has non-finite entries");
    if (!(norm2(nu) > 0.0)) throw InvalidSpec("TargetSpec: nu must be nonzero");
    return {std::move(nu), std::move(label)};
}

const char* to_string(VarianceMethod method) noexcept {
    return method == VarianceMethod::QuadraticForm ? "QuadraticForm" : "EmpiricalIF";
}

VarianceMethod parse_variance_method(const std::string& name) {
    if (name == "QuadraticForm" || name == "quadratic_form" || name == "qf") return VarianceMethod::QuadraticForm;
    if (name == "EmpiricalIF" || name == "empirical_if" || name == "if") return VarianceMethod::EmpiricalIF;
    throw InvalidArgument("unknown variance method '" + name + "'");
}

RidgeFit fit_outcome_ridge(const Trajectory& traj, double lambda_h) {
    if (!(lambda_h >= 0.0)) throw InvalidArgument("fit_outcome_ridge: lambda_h must be nonnegative");
    RidgeFit fit;
    fit.lambda_h = lambda_h;
    fit.gram = empirical_gram(traj);
    fit.cross = empirical_cross_moment(traj);
    fit.beta_hat = ridge_solve(fit.gram, fit.cross, lambda_h);
    double sse = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const double r = traj.outcome(t) - fit.predict(traj.feature(t));
        sse += r * r;
    }
    fit.in_sample_mse = sse / static_cast<double>(traj.horizon());
    return fit;
}

RieszFit fit_riesz_ridge(const Trajectory& traj, const TargetSpec& target, double lambda_alpha) {
    if (!(lambda_alpha >= 0.0)) throw InvalidArgument("fit_riesz_ridge: lambda_alpha must be nonnegative");
    if (target.nu.size() != traj.dim()) throw InvalidArgument("fit_riesz_ridge: nu dimension mismatch");
    const SymMatrix gram = empirical_gram(traj);
    RieszFit fit;
    fit.lambda_alpha = lambda_alpha;
    fit.weight_vector = ridge_solve(gram, target.nu, lambda_alpha);
    fit.empirical_sq_norm = std::max(0.0, quadratic_form(gram, fit.weight_vector));
    return fit;
}

double estimate_noise_variance(const Trajectory& traj, const RidgeFit& fit) {
    const double horizon = static_cast<double>(traj.horizon());
    const double d_eff = fit.lambda_h > 0.0 ? effective_dimension(fit.gram, fit.lambda_h) : static_cast<double>(traj.dim());
    const double denom = horizon - d_eff;
    if (!(denom > 0.0)) throw DegenerateDof("estimate_noise_variance: T <= effective dimension");
    return std::max(fit.in_sample_mse * horizon / denom, 1e-12);
}

double standard_error(const Trajectory& traj, const RidgeFit& outcome, const RieszFit& riesz, double sigma_hat,
                      VarianceMethod method) {
    const double horizon = static_cast<double>(traj.horizon());
    if (method == VarianceMethod::QuadraticForm) {
        if (sigma_hat == 0.0) return 0.0;
        return sigma_hat * std::sqrt(riesz.empirical_sq_norm / horizon);
    }
    double s = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const auto phi = traj.feature(t);
        const double a = riesz.evaluate(phi);
        const double r = traj.outcome(t) - outcome.predict(phi);
        s += a * a * r * r;
    }
    return std::sqrt(s) / horizon;
}

namespace {

EstimateReport finish(EstimateReport rep, double level) {
    const double z = stats::normal_quantile(0.5 + 0.5 * level);
    rep.level = level;
    rep.ci_low = rep.psi_hat - z * rep.se;
    rep.ci_high = rep.psi_hat + z * rep.se;
    return rep;
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
}

}  // namespace

EstimateReport one_step_estimate(const Trajectory& traj, const TargetSpec& target, double lambda_h, double lambda_alpha,
                                 VarianceMethod method, double level) {
    check_level(level);
    if (target.nu.size() != traj.dim()) throw InvalidArgument("one_step_estimate: nu dimension mismatch");
    const RidgeFit outcome = fit_outcome_ridge(traj, lambda_h);
    RieszFit riesz;
    riesz.lambda_alpha = lambda_alpha;
    riesz.weight_vector = ridge_solve(outcome.gram, target.nu, lambda_alpha);
    riesz.empirical_sq_norm = std::max(0.0, quadratic_form(outcome.gram, riesz.weight_vector));

    double correction = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const auto phi = traj.feature(t);
        correction += riesz.evaluate(phi) * (traj.outcome(t) - outcome.predict(phi));
    }
    correction /= static_cast<double>(traj.horizon());

    EstimateReport rep;
    rep.lambda_h = lambda_h;
    rep.lambda_alpha = lambda_alpha;
    rep.variance_method = method;
    rep.psi_plugin = dot(target.nu, outcome.beta_hat);
    rep.correction = correction;
    rep.psi_hat = rep.psi_plugin + rep.correction;
    try {
        rep.sigma_hat = std::sqrt(estimate_noise_variance(traj, outcome));
    } catch (const DegenerateDof&) {
        if (method == VarianceMethod::QuadraticForm) throw;
        rep.sigma_hat = std::numeric_limits<double>::quiet_NaN();
    }
    rep.se = standard_error(traj, outcome, riesz, rep.sigma_hat, method);
    return finish(rep, level);
}

EstimateReport plugin_ols_estimate(const Trajectory& traj, const TargetSpec& target, double level) {
    check_level(level);
    if (target.nu.size() != traj.dim()) throw InvalidArgument("plugin_ols_estimate: nu dimension mismatch");
    const RidgeFit outcome = fit_outcome_ridge(traj, 0.0);
    RieszFit riesz;
    riesz.weight_vector = ridge_solve(outcome.gram, target.nu, 0.0);
    riesz.empirical_sq_norm = std::max(0.0, quadratic_form(outcome.gram, riesz.weight_vector));

    EstimateReport rep;
    rep.variance_method = VarianceMethod::QuadraticForm;
    rep.psi_plugin = dot(target.nu, outcome.beta_hat);
    rep.psi_hat = rep.psi_plugin;
    rep.sigma_hat = std::sqrt(estimate_noise_variance(traj, outcome));
    rep.se = standard_error(traj, outcome, riesz, rep.sigma_hat, VarianceMethod::QuadraticForm);
    return finish(rep, level);
}

std::vector<double> lambda_h_grid(std::size_t horizon, std::size_t dim) {
    const double t = static_cast<double>(horizon);
    return {1.0 / t, static_cast<double>(dim) / t, 1.0 / std::sqrt(t)};
}

double select_lambda_h(const Trajectory& traj) {
    const std::size_t horizon = traj.horizon();
    const auto grid = lambda_h_grid(horizon, traj.dim());
    const std::size_t split = horizon / 2;
    if (split == 0 || split == horizon) return grid.front();
    const Trajectory train = traj.prefix(split);
    const SymMatrix gram = empirical_gram(train);
    const Vector cross = empirical_cross_moment(train);
    double best_err = std::numeric_limits<double>::infinity();
    double best = grid.front();
    for (double lambda : grid) {
        const Vector beta = ridge_solve(gram, cross, lambda);
        double err = 0.0;
        for (std::size_t t = split; t < horizon; ++t) {
            const double r = traj.outcome(t) - dot(beta, traj.feature(t));
            err += r * r;
        }
        if (err < best_err) {
            best_err = err;
            best = lambda;
        }
    }
    return best;
}

LambdaRule LambdaRule::parse(const std::string& text) {
    LambdaRule rule;
    if (text == "auto" || text == "holdout") {
        rule.kind = Kind::Holdout;
    } else if (text == "1/T") {
        rule.kind = Kind::InverseT;
    } else if (text == "d/T") {
        rule.kind = Kind::DimOverT;
    } else if (text == "1/sqrtT" || text == "1/sqrt(T)") {
        rule.kind = Kind::InverseSqrtT;
    } else {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            throw InvalidArgument("bad regularization level '" + text + "'");
        }
        if (used != text.size() || !(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidArgument("bad regularization level '" + text + "'");
        }
        rule.kind = Kind::Fixed;
        rule.value = v;
    }
    return rule;
}

double LambdaRule::resolve(const Trajectory& traj) const {
    const double t = static_cast<double>(traj.horizon());
    switch (kind) {
        case Kind::Fixed: return value;
        case Kind::InverseT: return 1.0 / t;
        case Kind::DimOverT: return static_cast<double>(traj.dim()) / t;
        case Kind::InverseSqrtT: return 1.0 / std::sqrt(t);
        case Kind::Holdout: return select_lambda_h(traj);
    }
    return value;
}

std::string LambdaRule::to_string() const {
    switch (kind) {
        case Kind::Fixed: return format_real(value);
        case Kind::InverseT: return "1/T";
        case Kind::DimOverT: return "d/T";
        case Kind::InverseSqrtT: return "1/sqrtT";
        case Kind::Holdout: return "auto";
    }
    return "?";
}

std::string policy_label(const Trajectory& traj) {
    const auto pos = traj.policy_descriptor.find("kind=");
    if (pos != std::string::npos) {
        const auto start = pos + 5;
        const auto end = traj.policy_descriptor.find(' ', start);
        return traj.policy_descriptor.substr(start, end == std::string::npos ? std::string::npos : end - start);
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, traj.policy_hash);
    return buf;
}

std::string estimate_csv_header() {
    return "seed,T,d,policy,lambda_h,lambda_alpha,psi_hat,psi_plugin,correction,se,ci_low,ci_high,sigma_hat,"
           "variance_method";
}

std::string estimate_csv_row(const Trajectory& traj, const EstimateReport& r) {
    std::string row = std::to_string(traj.seed) + ',' + std::to_string(traj.horizon()) + ',' +
                      std::to_string(traj.dim()) + ',' + policy_label(traj);
    for (double x : {r.lambda_h, r.lambda_alpha, r.psi_hat, r.psi_plugin, r.correction, r.se, r.ci_low, r.ci_high,
                     r.sigma_hat}) {
        row += ',';
        row += format_real(x);
    }
    row += ',';
    row += to_string(r.variance_method);
    return row;
}

std::string estimate_json(const Trajectory& traj, const EstimateReport& r) {
    nlohmann::ordered_json j;
    j["seed"] = traj.seed;
    j["T"] = traj.horizon();
    j["d"] = traj.dim();
    j["policy"] = policy_label(traj);
    j["lambda_h"] = r.lambda_h;
    j["lambda_alpha"] = r.lambda_alpha;
    j["psi_hat"] = r.psi_hat;
    j["psi_plugin"] = r.psi_plugin;
    j["correction"] = r.correction;
    j["se"] = r.se;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["sigma_hat"] = r.sigma_hat;
    j["variance_method"] = to_string(r.variance_method);
    j["level"] = r.level;
    return j.dump(2);
}

}  // namespace adlab
