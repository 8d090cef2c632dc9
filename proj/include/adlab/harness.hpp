#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adlab/config.hpp"
#include "adlab/diagnostics.hpp"
#include "adlab/environment.hpp"
#include "adlab/errors.hpp"
#include "adlab/estimators.hpp"
#include "adlab/policy.hpp"
#include "adlab/stats.hpp"

namespace adlab {

enum class BetaRule { Ones, E1, RandomUnit, Explicit };
enum class TargetRule { Aligned, Orthogonal, Fixed };
enum class DimRule { List, Exponent, Fraction };
enum class StabilizerChoice { LinUCB, LinUCBMainText, Oracle, Isotropic };

const char* to_string(TargetRule rule) noexcept;

/// Fully resolved experiment description. from_config() fails fast with
/// ConfigError on anything that cannot be resolved.
struct ExperimentConfig {
    FeatureKind feature_kind = FeatureKind::UnitSphereArms;
    std::size_t arms = 32;
    double sigma = 1.0;
    NoiseKind noise = NoiseKind::Gaussian;
    BetaRule beta_rule = BetaRule::Ones;
    Vector beta_explicit;
    double beta_scale = 1.0;

    PolicyKind policy_kind = PolicyKind::Uniform;
    double epsilon = 0.1;
    std::optional<double> gamma;  // nullopt: exploration_schedule(T, d, sigma, gamma_c)
    double gamma_c = 1.0;
    double ridge_reg = 1.0;
    std::size_t fixed_arm = 0;

    TargetRule target_rule = TargetRule::Aligned;
    Vector nu_fixed;  // empty means e1

    std::vector<std::size_t> horizons{400};
    DimRule dim_rule = DimRule::List;
    std::vector<std::size_t> dims{5};
    double dim_exponent = 0.5;
    double dim_fraction = 0.5;
    std::size_t replications = 100;
    std::uint64_t master_seed = 20240601;
    double level = 0.95;

    LambdaRule lambda_h = LambdaRule::parse("auto");
    LambdaRule lambda_alpha = LambdaRule::parse("1/T");
    VarianceMethod variance = VarianceMethod::EmpiricalIF;
    bool compare_ols = false;

    bool diagnostics = false;
    StabilizerChoice stabilizer = StabilizerChoice::LinUCB;
    std::size_t oracle_mc = 200;
    double lindeberg_eps = 0.01;
    bool anisotropy = false;

    double lan_epsilon = 1.0;
    std::size_t lan_oracle_mc = 2000;
    std::size_t lan_score_checks = 50;
    double lan_fd_step = 1e-4;
    double lan_fd_tolerance = 1e-4;

    std::size_t simulate_replications = 1;

    unsigned workers = 1;

    static ExperimentConfig from_config(const Config& config);
};

/// One (T, d) point of the grid with everything derived from the config.
struct Cell {
    std::size_t id = 0;
    std::size_t horizon = 0;
    std::size_t dim = 0;
    Environment env;
    PolicySpec policy;
    TargetSpec target;
    double truth = 0.0;  // nu^T beta0
    std::optional<StabilizerMatrix> stabilizer;
};

/// d values for horizon T under the configured rule.
std::size_t cell_dim(const ExperimentConfig& cfg, std::size_t horizon, std::size_t list_index);
/// Builds every cell; may run the pooled design oracle for the oracle stabilizer.
std::vector<Cell> build_cells(const ExperimentConfig& cfg);
Cell build_cell(const ExperimentConfig& cfg, std::size_t id, std::size_t horizon, std::size_t dim);

/// Seed of replication `rep` in cell `cell`.
inline std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep) {
    return derive_seed(master, cell, rep);
}

/// Status column value of a successful step.
inline constexpr const char* kOk = "ok";

struct ReplicationRecord {
    std::size_t cell = 0;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::size_t horizon = 0;
    std::size_t dim = 0;
    std::string policy;
    double gamma = 0.0;
    std::string target_rule;
    double truth = 0.0;

    std::string status = kOk;  // one-step estimate status (ok or an error code)
    EstimateReport estimate;
    bool covered = false;

    std::string ols_status = "skipped";
    EstimateReport ols;
    bool ols_covered = false;

    std::string diag_status = "skipped";
    StabilityReport stability;
    double remainder_ratio = 0.0;

    std::string anis_status = "skipped";
    AnisotropyReport anisotropy;
};

/// Coverage test with a relative slack of 1e-12 (1 + |truth|), so that
/// zero-width intervals at exact estimates count as covering.
bool interval_covers(double lo, double hi, double truth);

ReplicationRecord run_replication(const ExperimentConfig& cfg, const Cell& cell, std::size_t rep);

struct CoverageRow {
    std::size_t horizon = 0;
    std::size_t dim = 0;
    std::string policy;
    std::string target_rule;
    double level = 0.95;
    std::size_t replications = 0;
    std::size_t n_failed = 0;
    double coverage = 0.0;
    double mean_ci_width = 0.0;
    double rmse = 0.0;
    double bias = 0.0;
    double ks_stat = 0.0;
    double ks_pvalue = 0.0;
    double median_ds_stat = 0.0;  // median of |ds_stat|
    double median_riesz_dist_norm = 0.0;
    double median_remainder_ratio = 0.0;
    double median_lindeberg = 0.0;
    double median_top_alignment = 0.0;
    double median_bulk_ratio = 0.0;
    double max_trace_check_rel = 0.0;  // max over reps of trace_check / T
    std::size_t n_diag_failed = 0;
};

/// Aggregates the records of one cell; failed records are excluded but counted.
/// Statistics that need data that is absent are NaN.
CoverageRow coverage_summary(std::span<const ReplicationRecord> records, double truth, double level);

struct CompareRow {
    std::string estimator;  // one_step | plugin_ols
    std::size_t horizon = 0;
    std::size_t dim = 0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double rmse = 0.0;
    double coverage = 0.0;
    double rmse_ratio = 1.0;           // this estimator's rmse / one_step rmse over paired reps
    double one_step_win_fraction = 0.0;  // share of paired reps with |one_step error| < |ols error|
};

/// Paired comparison of the one-step and OLS columns of the records of one cell.
std::vector<CompareRow> compare_estimators(std::span<const ReplicationRecord> records);

struct ExperimentResult {
    std::vector<Cell> cells;
    std::vector<CoverageRow> rows;
    std::vector<CompareRow> compare;  // empty unless compare_ols
    std::vector<ReplicationRecord> records;  // kept only when requested
};

using RecordSink = std::function<void(const ReplicationRecord&)>;

/// Runs every (cell, rep) task on cfg.workers threads. The sink sees records in
/// (cell, rep) order whatever the scheduling, so all outputs are independent of
/// the worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RecordSink& sink = {}, bool keep_records = false);

std::string records_csv_header();
std::string records_csv_row(const ReplicationRecord& r);
std::string summary_csv_header();
std::string summary_csv_row(const CoverageRow& row);
std::string summary_json(const std::vector<CoverageRow>& rows, const std::vector<CompareRow>& compare);
std::string compare_csv_header();
std::string compare_csv_row(const CompareRow& row);

/// Writes records.csv, summary.csv, summary.json (and compare.csv when
/// comparing) into `dir`. Throws OutputIOError.
ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg, const std::string& dir);

struct LanSummary {
    std::size_t horizon = 0;
    std::size_t dim = 0;
    double epsilon = 0.0;
    std::size_t replications = 0;
    double sigma_bar = 0.0;
    double lan_mean = 0.0;
    double lan_variance = 0.0;
    double lan_mean_se = 0.0;  // sqrt(variance / n)
    double target_mean = 0.0;  // -epsilon^2 / 2
    double target_variance = 0.0;
    std::size_t nonpositive_factors = 0;
    double cg_variance = 0.0;  // variance of sqrt(T) D*_T
    double cg_target = 0.0;    // sigma_bar^2
    std::size_t score_checks = 0;
    std::size_t score_checks_passed = 0;
    double score_max_rel_err = 0.0;
};

/// Per cell: pooled design oracle, alpha_bar and sigma_bar, then the LAN
/// statistic, its score and the canonical gradient on every replication.
std::vector<LanSummary> run_lan_check(const ExperimentConfig& cfg);
std::string lan_summary_json(const std::vector<LanSummary>& rows);
std::string lan_summary_csv(const std::vector<LanSummary>& rows);

}  // namespace adlab
