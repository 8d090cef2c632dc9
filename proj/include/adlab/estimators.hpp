#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "adlab/linalg.hpp"
#include "adlab/trajectory.hpp"

namespace adlab {

/// Scalar linear target nu^T beta.
struct TargetSpec {
    Vector nu;
    std::string label;

    /// Throws InvalidSpec when nu is zero or non-finite.
    static TargetSpec make(Vector nu, std::string label = "custom");
};

/// Ridge outcome regression: beta_hat = (Sigma_hat + lambda_h I)^{-1} Sigma_hat_ZY.
struct RidgeFit {
    Vector beta_hat;
    double lambda_h = 0.0;
    SymMatrix gram;  // Sigma_hat used in the fit
    Vector cross;    // Sigma_hat_ZY
    double in_sample_mse = 0.0;

    double predict(std::span<const double> feature) const { return dot(beta_hat, feature); }
};

/// Ridge Riesz representer alpha_hat(z) = w^T phi(z) with w = (Sigma_hat + lambda_alpha I)^{-1} nu.
struct RieszFit {
    Vector weight_vector;
    double lambda_alpha = 0.0;
    double empirical_sq_norm = 0.0;  // w^T Sigma_hat w

    double evaluate(std::span<const double> feature) const { return dot(weight_vector, feature); }
};

enum class VarianceMethod { QuadraticForm, EmpiricalIF };

const char* to_string(VarianceMethod method) noexcept;
VarianceMethod parse_variance_method(const std::string& name);

struct EstimateReport {
    double psi_hat = 0.0;
    double psi_plugin = 0.0;
    double correction = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double sigma_hat = 0.0;  // NaN when the residual degrees of freedom are exhausted
    double lambda_h = 0.0;
    double lambda_alpha = 0.0;
    double level = 0.95;
    VarianceMethod variance_method = VarianceMethod::EmpiricalIF;
};

RidgeFit fit_outcome_ridge(const Trajectory& traj, double lambda_h);
RieszFit fit_riesz_ridge(const Trajectory& traj, const TargetSpec& target, double lambda_alpha);

/// sum_t (Y_t - h_hat(Z_t))^2 / (T - d_eff(lambda_h)), floored at 1e-12.
/// d_eff is the full dimension when lambda_h = 0. Throws DegenerateDof when T <= d_eff.
double estimate_noise_variance(const Trajectory& traj, const RidgeFit& fit);

/// QuadraticForm: sigma_hat * sqrt(w^T Sigma_hat w / T).
/// EmpiricalIF:   sqrt(sum_t alpha_hat(Z_t)^2 (Y_t - h_hat(Z_t))^2) / T.
double standard_error(const Trajectory& traj, const RidgeFit& outcome, const RieszFit& riesz, double sigma_hat,
                      VarianceMethod method);

/// Plug-in nu^T beta_hat plus the empirical mean of alpha_hat(Z)(Y - h_hat(Z)).
EstimateReport one_step_estimate(const Trajectory& traj, const TargetSpec& target, double lambda_h, double lambda_alpha,
                                 VarianceMethod method = VarianceMethod::EmpiricalIF, double level = 0.95);

/// nu^T Sigma_hat^{-1} Sigma_hat_ZY with the quadratic-form standard error at lambda = 0.
/// Throws SingularSystem when Sigma_hat is numerically singular.
EstimateReport plugin_ols_estimate(const Trajectory& traj, const TargetSpec& target, double level = 0.95);

/// Candidate ridge levels {1/T, d/T, 1/sqrt(T)}.
std::vector<double> lambda_h_grid(std::size_t horizon, std::size_t dim);
/// Picks the grid value with the smallest squared prediction error on rounds
/// after T/2 when fit on rounds up to T/2 (a causal holdout).
double select_lambda_h(const Trajectory& traj);

/// A regularization level: a fixed value or a horizon/dimension rule.
struct LambdaRule {
    enum class Kind { Fixed, InverseT, DimOverT, InverseSqrtT, Holdout } kind = Kind::InverseT;
    double value = 0.0;

    /// Accepts "auto" (holdout), "1/T", "d/T", "1/sqrtT" or a nonnegative number.
    static LambdaRule parse(const std::string& text);
    double resolve(const Trajectory& traj) const;
    std::string to_string() const;
};

std::string estimate_csv_header();
/// Row matching estimate_csv_header(); the policy column is the policy kind.
std::string estimate_csv_row(const Trajectory& traj, const EstimateReport& report);
std::string estimate_json(const Trajectory& traj, const EstimateReport& report);
/// "kind" token of a policy descriptor, or the policy hash in hex when unknown.
std::string policy_label(const Trajectory& traj);

std::string format_real(double x);

}  // namespace adlab
