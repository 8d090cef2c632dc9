#pragma once

#include <optional>
#include <span>
#include <string>

#include "adlab/estimators.hpp"
#include "adlab/linalg.hpp"
#include "adlab/trajectory.hpp"

namespace adlab {

enum class StabilizerSource { LinUCBFormula, OracleSigmaBar, UserSupplied };

const char* to_string(StabilizerSource source) noexcept;

/// Deterministic SPD matrix Sigma_tilde_T that Sigma_hat_T is compared against.
struct StabilizerMatrix {
    SymMatrix sigma_tilde_mat;
    StabilizerSource source = StabilizerSource::UserSupplied;

    /// Throws InvalidArgument unless `mat` is positive definite.
    static StabilizerMatrix make(SymMatrix mat, StabilizerSource source = StabilizerSource::UserSupplied);

    std::size_t dim() const noexcept { return sigma_tilde_mat.dim(); }
    /// Sigma_tilde^{-1} v
    Vector solve(std::span<const double> v) const;
};

/// Appendix: Sigma_tilde = P_star + (gamma / sqrt(T d)) P_perp.
/// MainText: Sigma_tilde = P_star + (T d)^{1/4} gamma^{-1/2} P_perp.
enum class StabilizerForm { Appendix, MainText };

/// P_star = beta0 beta0^T / |beta0|^2, P_perp = I - P_star. Throws ZeroSignal for beta0 = 0.
StabilizerMatrix linucb_target_matrix(std::span<const double> beta0, std::size_t horizon, std::size_t dim, double gamma,
                                      StabilizerForm form = StabilizerForm::Appendix);

/// sigma * sqrt(nu^T Sigma_tilde^{-1} nu)
double sigma_tilde(const TargetSpec& target, const StabilizerMatrix& stab, double sigma);
/// sigma * sqrt(nu^T Sigma_bar^+ nu). Throws IdentificationFailure when nu has
/// more than 1e-6 |nu| outside range(Sigma_bar).
double sigma_bar(const TargetSpec& target, const SymMatrix& sigma_bar_gram, double sigma);
/// Sigma_bar^+ nu, the weight vector of the population Riesz representer.
/// Same identification check as sigma_bar.
Vector alpha_bar_weights(const TargetSpec& target, const SymMatrix& sigma_bar_gram);

/// (sigma^2 / sigma_tilde^2) nu^T Sigma_tilde^{-1} (Sigma_hat - Sigma_tilde) Sigma_tilde^{-1} nu.
/// The sigma^2 factors cancel, so sigma only has to be positive.
double directional_stability_stat(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab,
                                  double sigma);
double directional_stability_stat(const SymMatrix& sigma_hat, const TargetSpec& target, const StabilizerMatrix& stab,
                                  double sigma);

/// |alpha_hat - alpha_tilde|_{L2(P_T)} = sqrt(dw^T Sigma_hat dw), dw = (Sigma_hat + lambda_alpha I)^{-1} nu - Sigma_tilde^{-1} nu.
/// With normalize the distance is divided by sigma_tilde(target, stab, sigma).
double riesz_stability_distance(const Trajectory& traj, const TargetSpec& target, double lambda_alpha,
                                const StabilizerMatrix& stab, bool normalize, double sigma = 1.0);
double riesz_stability_distance(const SymMatrix& sigma_hat, const TargetSpec& target, double lambda_alpha,
                                const StabilizerMatrix& stab, bool normalize, double sigma = 1.0);

/// sqrt((beta_hat - beta0)^T Sigma_hat (beta_hat - beta0))
double outcome_l2_error(const Trajectory& traj, const RidgeFit& fit, std::span<const double> beta0);

struct RemainderBreakdown {
    double riesz_err = 0.0;
    double outcome_err = 0.0;
    double cross_term = 0.0;  // riesz_err * outcome_err
    double bias_term = 0.0;   // |(1/T) nu^T (Sigma_hat + lambda_alpha I)^{-1} (beta_hat - beta0)|
    double r_total = 0.0;     // riesz_err * (outcome_err + 1/sqrt(T)) + bias_term
    double threshold = 0.0;   // sigma_tilde / sqrt(T)
};

RemainderBreakdown von_mises_remainder(const Trajectory& traj, const TargetSpec& target, double lambda_h,
                                       double lambda_alpha, const StabilizerMatrix& stab, std::span<const double> beta0,
                                       double sigma);

/// sum_t alpha_tilde(Z_t)^2 sigma^2 / (T sigma_tilde^2) * g(c_t) with
/// c_t = sqrt(eps T sigma_tilde^2) / |alpha_tilde(Z_t)| and g(c) = E[e^2 1{|e| > c}] / sigma^2 for e ~ N(0, sigma^2).
double lindeberg_stat(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab, double sigma,
                      double eps);

struct AnisotropyReport {
    double top_alignment = 0.0;  // min(|v - e1|, |v + e1|), v top eigenvector of T Sigma_hat
    double bulk_ratio_min = 0.0;
    double bulk_ratio_median = 0.0;
    double bulk_ratio_max = 0.0;
    double trace_check = 0.0;  // |Tr(T Sigma_hat + ridge I) - (T + d ridge)|
};

/// Throws NotUnitNorm if any feature deviates from unit norm by more than 1e-9.
AnisotropyReport eigen_anisotropy_report(const Trajectory& traj, std::span<const double> beta0, double gamma,
                                         double ridge_reg = 1.0);

struct LanResult {
    double value = 0.0;
    bool nonpositive_factor = false;  // some 1 + (eta/2T) alpha_bar r_t was <= 0
};

/// sum_t [2 log|1 + (eta/2T) alpha_bar(Z_t)(Y_t - phi_t^T beta0)| - log(1 + eta^2 sigma_bar^2 / (4 T^2))]
/// with eta = epsilon sqrt(T) / sigma_bar.
LanResult lan_log_likelihood_ratio(const Trajectory& traj, double sigma_bar_value, std::span<const double> alpha_bar,
                                   std::span<const double> beta0, double epsilon);
/// Delta_T = sum_t alpha_bar(Z_t)(Y_t - phi_t^T beta0) / (sqrt(T) sigma_bar), the derivative of the
/// statistic in epsilon at 0.
double lan_score(const Trajectory& traj, double sigma_bar_value, std::span<const double> alpha_bar,
                 std::span<const double> beta0);

/// D*_T = (1/T) sum_t alpha_bar(Z_t)(Y_t - phi_t^T beta0), the canonical gradient evaluated on the data.
double canonical_gradient(const Trajectory& traj, std::span<const double> alpha_bar, std::span<const double> beta0);

/// d (gamma^8 / T)^{(d+1)/(d-1)} + d^{1/4} / sqrt(gamma); requires d >= 2.
double epsilon_bulk(std::size_t horizon, std::size_t dim, double gamma);

struct StabilityReport {
    double ds_stat = 0.0;
    double riesz_dist = 0.0;
    double riesz_dist_normalized = 0.0;
    double lindeberg = 0.0;
    RemainderBreakdown remainder;
    double sigma_tilde = 0.0;
    std::optional<double> sigma_bar_mc;
    double gamma = 0.0;
    StabilizerSource source = StabilizerSource::UserSupplied;
};

struct StabilityInputs {
    double lambda_h = 0.0;
    double lambda_alpha = 0.0;
    double sigma = 1.0;
    double lindeberg_eps = 0.01;
    double gamma = 0.0;  // recorded only
    std::optional<double> sigma_bar_mc;
};

StabilityReport stability_report(const Trajectory& traj, const TargetSpec& target, const StabilizerMatrix& stab,
                                 std::span<const double> beta0, const StabilityInputs& in);

std::string stability_csv_header();
std::string stability_csv_row(const Trajectory& traj, const StabilityReport& report);
std::string stability_json(const Trajectory& traj, const StabilityReport& report);

}  // namespace adlab
