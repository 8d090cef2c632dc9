#include "adlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "adlab/errors.hpp"
#include "adlab/stats.hpp"

namespace adlab {

const char* to_string(StabilizerSource source) noexcept {
    switch (source) {
        case StabilizerSource::LinUCBFormula: return "LinUCBFormula";
        case StabilizerSource::OracleSigmaBar: return "OracleSigmaBar";
        case StabilizerSource::UserSupplied: return "UserSupplied";
    }
    return "?";
}

StabilizerMatrix StabilizerMatrix::make(SymMatrix mat, StabilizerSource source) {
    if (mat.dim() == 0 || !Cholesky::is_positive_definite(mat)) {
        throw InvalidArgument("StabilizerMatrix: matrix must be positive definite");
    }
    return {std::move(mat), source};
}

Vector StabilizerMatrix::solve(std::span<const double> v) const { return Cholesky(sigma_tilde_mat).solve(v); }

StabilizerMatrix linucb_target_matrix(std::span<const double> beta0, std::size_t horizon, std::size_t dim, double gamma,
                                      StabilizerForm form) {
    if (beta0.size() != dim) throw InvalidArgument("linucb_target_matrix: beta0 dimension mismatch");
    if (horizon < 1 || dim < 2) throw InvalidArgument("linucb_target_matrix: needs T >= 1 and d >= 2");
    if (!(gamma > 0.0)) throw InvalidArgument("linucb_target_matrix: gamma must be positive");
    const double nb = norm2(beta0);
    if (!(nb > 0.0)) throw ZeroSignal("linucb_target_matrix: beta0 is zero");
    const double t = static_cast<double>(horizon);
    const double d = static_cast<double>(dim);
    const double perp = form == StabilizerForm::Appendix ? gamma / std::sqrt(t * d)
                                                         : std::pow(t * d, 0.25) / std::sqrt(gamma);
    // P_star + perp (I - P_star) = perp I + (1 - perp) P_star
    SymMatrix m = SymMatrix::identity(dim, perp);
    m.rank_one_update(beta0, (1.0 - perp) / (nb * nb));
    return StabilizerMatrix::make(std::move(m), StabilizerSource::LinUCBFormula);
}

double sigma_tilde(const TargetSpec& target, const StabilizerMatrix& stab, double sigma) {
    const Vector u = stab.solve(target.nu);
    return sigma * std::sqrt(std::max(0.0, dot(target.nu, u)));
}

Vector alpha_bar_weights(const TargetSpec& target, const SymMatrix& sigma_bar_gram) {
    if (target.nu.size() != sigma_bar_gram.dim()) throw InvalidArgument("alpha_bar_weights: dimension mismatch");
    Vector w = pseudo_inverse_apply(sigma_bar_gram, target.nu);
    const Vector back = sigma_bar_gram.multiply(w);
    const double miss = norm2(add_scaled(target.nu, back, -1.0));
    if (miss > 1e-6 * norm2(target.nu)) {
        throw IdentificationFailure("nu is not in the range of the pooled design matrix");
    }
    return w;
}

double sigma_bar(const TargetSpec& target, const SymMatrix& sigma_bar_gram, double sigma) {
    const Vector w = alpha_bar_weights(target, sigma_bar_gram);
    return sigma * std::sqrt(std::max(0.0, dot(target.nu, w)));
}

double directional_stability_stat(const SymMatrix& sigma_hat, const TargetSpec& target, const StabilizerMatrix& stab,
                                  double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("directional_stability_stat: sigma must be positive");
    const Vector u = stab.solve(target.nu);
    const double denom = dot(target.nu, u);
    return (quadratic_form(sigma_hat, u) - quadratic_form(stab.sigma_tilde_mat, u)) / denom;
}

double directional_stability_stat(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab,
                                  double sigma) {
    return directional_stability_stat(empirical_gram(traj), target, stab, sigma);
}

double riesz_stability_distance(const SymMatrix& sigma_hat, const TargetSpec& target, double lambda_alpha,
                                const StabilizerMatrix& stab, bool normalize, double sigma) {
    const Vector w_hat = ridge_solve(sigma_hat, target.nu, lambda_alpha);
    const Vector w_tilde = stab.solve(target.nu);
    const Vector dw = add_scaled(w_hat, w_tilde, -1.0);
    const double dist = std::sqrt(std::max(0.0, quadratic_form(sigma_hat, dw)));
    if (!normalize) return dist;
    return dist / sigma_tilde(target, stab, sigma);
}

double riesz_stability_distance(const Trajectory& traj, const TargetSpec& target, double lambda_alpha,
                                const StabilizerMatrix& stab, bool normalize, double sigma) {
    return riesz_stability_distance(empirical_gram(traj), target, lambda_alpha, stab, normalize, sigma);
}

double outcome_l2_error(const Trajectory& traj, const RidgeFit& fit, std::span<const double> beta0) {
    if (beta0.size() != traj.dim()) throw InvalidArgument("outcome_l2_error: beta0 dimension mismatch");
    const Vector diff = add_scaled(fit.beta_hat, beta0, -1.0);
    return std::sqrt(std::max(0.0, quadratic_form(fit.gram, diff)));
}

RemainderBreakdown von_mises_remainder(const Trajectory& traj, const TargetSpec& target, double lambda_h,
                                       double lambda_alpha, const StabilizerMatrix& stab, std::span<const double> beta0,
                                       double sigma) {
    const RidgeFit fit = fit_outcome_ridge(traj, lambda_h);
    const double horizon = static_cast<double>(traj.horizon());
    RemainderBreakdown r;
    r.riesz_err = riesz_stability_distance(fit.gram, target, lambda_alpha, stab, false);
    r.outcome_err = outcome_l2_error(traj, fit, beta0);
    r.cross_term = r.riesz_err * r.outcome_err;
    const Vector w_hat = ridge_solve(fit.gram, target.nu, lambda_alpha);
    r.bias_term = std::abs(dot(w_hat, add_scaled(fit.beta_hat, beta0, -1.0))) / horizon;
    r.r_total = r.riesz_err * (r.outcome_err + 1.0 / std::sqrt(horizon)) + r.bias_term;
    r.threshold = sigma_tilde(target, stab, sigma) / std::sqrt(horizon);
    return r;
}

double lindeberg_stat(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab, double sigma,
                      double eps) {
    if (!(eps >= 0.0)) throw InvalidArgument("lindeberg_stat: eps must be nonnegative");
    const double st = sigma_tilde(target, stab, sigma);
    if (!(st > 0.0)) return 0.0;
    const Vector w = stab.solve(target.nu);
    const double horizon = static_cast<double>(traj.horizon());
    const double budget = std::sqrt(eps * horizon) * st;
    double total = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const double a = dot(w, traj.feature(t));
        if (a == 0.0) continue;
        const double c = budget / std::abs(a);
        total += a * a * stats::truncated_second_moment(c / sigma);
    }
    return total * sigma * sigma / (horizon * st * st);
}

AnisotropyReport eigen_anisotropy_report(const Trajectory& traj, std::span<const double> beta0, double gamma,
                                         double ridge_reg) {
    const std::size_t d = traj.dim();
    if (beta0.size() != d) throw InvalidArgument("eigen_anisotropy_report: beta0 dimension mismatch");
    if (d < 2) throw InvalidArgument("eigen_anisotropy_report: needs d >= 2");
    const double nb = norm2(beta0);
    if (!(nb > 0.0)) throw ZeroSignal("eigen_anisotropy_report: beta0 is zero");
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        if (std::abs(norm2(traj.feature(t)) - 1.0) > 1e-9) {
            throw NotUnitNorm("eigen_anisotropy_report: feature at round " + std::to_string(t + 1) + " is not unit norm");
        }
    }
    const double horizon = static_cast<double>(traj.horizon());
    SymMatrix g(d);
    for (std::size_t t = 0; t < traj.horizon(); ++t) g.rank_one_update(traj.feature(t), 1.0);
    const EigenDecomposition eig = sym_eigendecomposition(g);

    AnisotropyReport rep;
    const Vector& v = eig.vectors.front();
    double minus = 0.0, plus = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double e = beta0[i] / nb;
        minus += (v[i] - e) * (v[i] - e);
        plus += (v[i] + e) * (v[i] + e);
    }
    rep.top_alignment = std::sqrt(std::min(minus, plus));

    const double scale = std::sqrt(2.0 * gamma * gamma * horizon / (static_cast<double>(d) + 1.0));
    Vector ratios(eig.values.begin() + 1, eig.values.end());
    for (double& r : ratios) r /= scale;
    rep.bulk_ratio_min = *std::min_element(ratios.begin(), ratios.end());
    rep.bulk_ratio_max = *std::max_element(ratios.begin(), ratios.end());
    rep.bulk_ratio_median = stats::median(ratios);
    const double dd = static_cast<double>(d);
    rep.trace_check = std::abs(g.trace() + dd * ridge_reg - (horizon + dd * ridge_reg));
    return rep;
}

LanResult lan_log_likelihood_ratio(const Trajectory& traj, double sigma_bar_value, std::span<const double> alpha_bar,
                                   std::span<const double> beta0, double epsilon) {
    if (!(sigma_bar_value > 0.0)) throw InvalidArgument("lan_log_likelihood_ratio: sigma_bar must be positive");
    if (alpha_bar.size() != traj.dim() || beta0.size() != traj.dim()) {
        throw InvalidArgument("lan_log_likelihood_ratio: dimension mismatch");
    }
    LanResult out;
    if (epsilon == 0.0) return out;
    const double horizon = static_cast<double>(traj.horizon());
    const double eta = epsilon * std::sqrt(horizon) / sigma_bar_value;
    const double step = eta / (2.0 * horizon);
    const double norm_term = std::log1p(eta * eta * sigma_bar_value * sigma_bar_value / (4.0 * horizon * horizon));
    double total = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const auto phi = traj.feature(t);
        const double factor = 1.0 + step * dot(alpha_bar, phi) * (traj.outcome(t) - dot(beta0, phi));
        if (factor <= 0.0) out.nonpositive_factor = true;
        total += 2.0 * std::log(std::abs(factor)) - norm_term;
    }
    out.value = total;
    return out;
}

double lan_score(const Trajectory& traj, double sigma_bar_value, std::span<const double> alpha_bar,
                 std::span<const double> beta0) {
    if (!(sigma_bar_value > 0.0)) throw InvalidArgument("lan_score: sigma_bar must be positive");
    double total = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const auto phi = traj.feature(t);
        total += dot(alpha_bar, phi) * (traj.outcome(t) - dot(beta0, phi));
    }
    return total / (std::sqrt(static_cast<double>(traj.horizon())) * sigma_bar_value);
}

double canonical_gradient(const Trajectory& traj, std::span<const double> alpha_bar, std::span<const double> beta0) {
    if (alpha_bar.size() != traj.dim() || beta0.size() != traj.dim()) {
        throw InvalidArgument("canonical_gradient: dimension mismatch");
    }
    double total = 0.0;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const auto phi = traj.feature(t);
        total += dot(alpha_bar, phi) * (traj.outcome(t) - dot(beta0, phi));
    }
    return total / static_cast<double>(traj.horizon());
}

double epsilon_bulk(std::size_t horizon, std::size_t dim, double gamma) {
    if (dim < 2) throw InvalidArgument("epsilon_bulk: needs d >= 2");
    const double d = static_cast<double>(dim);
    const double t = static_cast<double>(horizon);
    return d * std::pow(std::pow(gamma, 8.0) / t, (d + 1.0) / (d - 1.0)) + std::pow(d, 0.25) / std::sqrt(gamma);
}

StabilityReport stability_report(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab,
                                 std::span<const double> beta0, const StabilityInputs& in) {
    const SymMatrix gram = empirical_gram(traj);
    StabilityReport rep;
    rep.ds_stat = directional_stability_stat(gram, target, stab, in.sigma);
    rep.riesz_dist = riesz_stability_distance(gram, target, in.lambda_alpha, stab, false);
    rep.sigma_tilde = sigma_tilde(target, stab, in.sigma);
    rep.riesz_dist_normalized = rep.riesz_dist / rep.sigma_tilde;
    rep.lindeberg = lindeberg_stat(traj, target, stab, in.sigma, in.lindeberg_eps);
    rep.remainder = von_mises_remainder(traj, target, in.lambda_h, in.lambda_alpha, stab, beta0, in.sigma);
    rep.sigma_bar_mc = in.sigma_bar_mc;
    rep.gamma = in.gamma;
    rep.source = stab.source;
    return rep;
}

std::string stability_csv_header() {
    return "seed,T,d,policy,gamma,ds_stat,riesz_dist,riesz_dist_normalized,lindeberg,riesz_err,outcome_err,"
           "cross_term,bias_term,r_total,threshold,sigma_tilde,sigma_bar_mc,stabilizer";
}

std::string stability_csv_row(const Trajectory& traj, const StabilityReport& r) {
    std::string row = std::to_string(traj.seed) + ',' + std::to_string(traj.horizon()) + ',' +
                      std::to_string(traj.dim()) + ',' + policy_label(traj);
    const double sb = r.sigma_bar_mc.value_or(std::numeric_limits<double>::quiet_NaN());
    for (double x : {r.gamma, r.ds_stat, r.riesz_dist, r.riesz_dist_normalized, r.lindeberg, r.remainder.riesz_err,
                     r.remainder.outcome_err, r.remainder.cross_term, r.remainder.bias_term, r.remainder.r_total,
                     r.remainder.threshold, r.sigma_tilde, sb}) {
        row += ',';
        row += format_real(x);
    }
    row += ',';
    row += to_string(r.source);
    return row;
}

std::string stability_json(const Trajectory& traj, const StabilityReport& r) {
    nlohmann::ordered_json j;
    j["seed"] = traj.seed;
    j["T"] = traj.horizon();
    j["d"] = traj.dim();
    j["policy"] = policy_label(traj);
    j["gamma"] = r.gamma;
    j["ds_stat"] = r.ds_stat;
    j["riesz_dist"] = r.riesz_dist;
    j["riesz_dist_normalized"] = r.riesz_dist_normalized;
    j["lindeberg"] = r.lindeberg;
    j["remainder"] = {{"riesz_err", r.remainder.riesz_err},   {"outcome_err", r.remainder.outcome_err},
                      {"cross_term", r.remainder.cross_term}, {"bias_term", r.remainder.bias_term},
                      {"r_total", r.remainder.r_total},       {"threshold", r.remainder.threshold}};
    j["sigma_tilde"] = r.sigma_tilde;
    j["sigma_bar_mc"] = r.sigma_bar_mc ? nlohmann::ordered_json(*r.sigma_bar_mc) : nlohmann::ordered_json(nullptr);
    j["stabilizer"] = to_string(r.source);
    if (r.source == StabilizerSource::LinUCBFormula) {
        j["note"] = "LinUCB stabilizer uses the gamma/sqrt(Td) perpendicular weight; the (Td)^(1/4)/sqrt(gamma) "
                    "variant differs by a square root";
    }
    return j.dump(2);
}

}  // namespace adlab
