#include "adlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "adlab/trajectory.hpp"

namespace adlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Replication indices reserved for per-cell streams; real reps never get this high.
constexpr std::uint64_t kBetaStream = ~std::uint64_t{0};
constexpr std::uint64_t kOracleStream = ~std::uint64_t{0} - 1;

template <class F>
auto config_guard(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

Vector parse_vector(const Config& c, const std::string& key) {
    const auto v = c.get_reals(key);
    if (v.empty()) throw ConfigError(key + ": empty vector");
    return v;
}

}  // namespace

const char* to_string(TargetRule rule) noexcept {
    switch (rule) {
        case TargetRule::Aligned: return "aligned";
        case TargetRule::Orthogonal: return "orthogonal";
        case TargetRule::Fixed: return "fixed";
    }
    return "?";
}

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
    ExperimentConfig e;
    const std::string features = c.get("env.features");
    if (features == "intercept") e.feature_kind = FeatureKind::Intercept;
    else if (features == "tabular") e.feature_kind = FeatureKind::TabularArms;
    else if (features == "context_arm") e.feature_kind = FeatureKind::ContextArmBasis;
    else if (features == "unit_sphere") e.feature_kind = FeatureKind::UnitSphereArms;
    else throw ConfigError("env.features: unknown feature map '" + features + "'");

    const auto arms = c.get_int("env.arms");
    if (arms < 2 && e.feature_kind != FeatureKind::Intercept && e.feature_kind != FeatureKind::TabularArms) {
        throw ConfigError("env.arms: needs at least two arms");
    }
    e.arms = static_cast<std::size_t>(std::max<std::int64_t>(arms, 1));
    e.sigma = c.get_real("env.sigma");
    if (e.sigma < 0.0) throw ConfigError("env.sigma: must be nonnegative");
    const std::string noise = c.get("env.noise");
    if (noise == "gaussian") e.noise = NoiseKind::Gaussian;
    else if (noise == "rademacher") e.noise = NoiseKind::BoundedRademacherScaled;
    else throw ConfigError("env.noise: unknown noise law '" + noise + "'");

    const std::string beta = c.get("env.beta0");
    if (beta == "ones") e.beta_rule = BetaRule::Ones;
    else if (beta == "e1") e.beta_rule = BetaRule::E1;
    else if (beta == "random_unit") e.beta_rule = BetaRule::RandomUnit;
    else {
        e.beta_rule = BetaRule::Explicit;
        e.beta_explicit = parse_vector(c, "env.beta0");
    }
    e.beta_scale = c.get_real("env.beta0_scale");

    const std::string kind = c.get("policy.kind");
    if (kind == "uniform") e.policy_kind = PolicyKind::Uniform;
    else if (kind == "epsilon_greedy") e.policy_kind = PolicyKind::EpsilonGreedy;
    else if (kind == "linucb") e.policy_kind = PolicyKind::LinUCB;
    else if (kind == "fixed") e.policy_kind = PolicyKind::FixedArm;
    else throw ConfigError("policy.kind: unknown policy '" + kind + "'");
    e.epsilon = c.get_real("policy.epsilon");
    if (!(e.epsilon >= 0.0 && e.epsilon <= 1.0)) throw ConfigError("policy.epsilon: must lie in [0, 1]");
    if (c.get("policy.gamma") != "auto") {
        e.gamma = c.get_real("policy.gamma");
        if (*e.gamma < 0.0) throw ConfigError("policy.gamma: must be nonnegative");
    }
    e.gamma_c = c.get_real("policy.gamma_c");
    e.ridge_reg = c.get_real("policy.ridge_reg");
    if (!(e.ridge_reg > 0.0)) throw ConfigError("policy.ridge_reg: must be positive");
    const auto arm = c.get_int("policy.arm");
    if (arm < 0) throw ConfigError("policy.arm: must be nonnegative");
    e.fixed_arm = static_cast<std::size_t>(arm);

    const std::string rule = c.get("target.rule");
    if (rule == "aligned") e.target_rule = TargetRule::Aligned;
    else if (rule == "orthogonal") e.target_rule = TargetRule::Orthogonal;
    else if (rule == "fixed") e.target_rule = TargetRule::Fixed;
    else throw ConfigError("target.rule: unknown rule '" + rule + "'");
    if (c.get("target.nu") != "e1") e.nu_fixed = parse_vector(c, "target.nu");

    e.horizons = c.get_sizes("experiment.horizons");
    if (e.horizons.empty()) throw ConfigError("experiment.horizons: empty");
    for (std::size_t i = 0; i < e.horizons.size(); ++i) {
        if (e.horizons[i] < 1) throw ConfigError("experiment.horizons: T must be positive");
        if (i > 0 && e.horizons[i] <= e.horizons[i - 1]) throw ConfigError("experiment.horizons: must be strictly increasing");
    }
    const std::string dim_rule = c.get("experiment.dim_rule");
    if (dim_rule == "list") e.dim_rule = DimRule::List;
    else if (dim_rule == "exponent") e.dim_rule = DimRule::Exponent;
    else if (dim_rule == "fraction") e.dim_rule = DimRule::Fraction;
    else throw ConfigError("experiment.dim_rule: unknown rule '" + dim_rule + "'");
    e.dims = c.get_sizes("experiment.dims");
    if (e.dim_rule == DimRule::List && e.dims.empty()) throw ConfigError("experiment.dims: empty");
    e.dim_exponent = c.get_real("experiment.dim_exponent");
    e.dim_fraction = c.get_real("experiment.dim_fraction");
    if (!(e.dim_exponent > 0.0 && e.dim_exponent <= 1.0)) throw ConfigError("experiment.dim_exponent: must lie in (0, 1]");
    if (!(e.dim_fraction > 0.0 && e.dim_fraction <= 1.0)) throw ConfigError("experiment.dim_fraction: must lie in (0, 1]");
    const auto reps = c.get_int("experiment.replications");
    if (reps < 1) throw ConfigError("experiment.replications: must be at least 1");
    e.replications = static_cast<std::size_t>(reps);
    e.master_seed = c.get_u64("experiment.seed");
    e.level = c.get_real("experiment.level");
    if (!(e.level > 0.0 && e.level < 1.0)) throw ConfigError("experiment.level: must lie in (0, 1)");

    e.lambda_h = config_guard("estimator.lambda_h", [&] { return LambdaRule::parse(c.get("estimator.lambda_h")); });
    e.lambda_alpha =
        config_guard("estimator.lambda_alpha", [&] { return LambdaRule::parse(c.get("estimator.lambda_alpha")); });
    e.variance = config_guard("estimator.variance", [&] { return parse_variance_method(c.get("estimator.variance")); });
    e.compare_ols = c.get_bool("estimator.compare_ols");

    e.diagnostics = c.get_bool("diagnostics.enabled");
    const std::string stab = c.get("diagnostics.stabilizer");
    if (stab == "linucb") e.stabilizer = StabilizerChoice::LinUCB;
    else if (stab == "linucb_main_text") e.stabilizer = StabilizerChoice::LinUCBMainText;
    else if (stab == "oracle") e.stabilizer = StabilizerChoice::Oracle;
    else if (stab == "isotropic") e.stabilizer = StabilizerChoice::Isotropic;
    else throw ConfigError("diagnostics.stabilizer: unknown choice '" + stab + "'");
    const auto omc = c.get_int("diagnostics.oracle_mc");
    if (omc < 1) throw ConfigError("diagnostics.oracle_mc: must be at least 1");
    e.oracle_mc = static_cast<std::size_t>(omc);
    e.lindeberg_eps = c.get_real("diagnostics.lindeberg_eps");
    if (e.lindeberg_eps < 0.0) throw ConfigError("diagnostics.lindeberg_eps: must be nonnegative");
    e.anisotropy = c.get_bool("diagnostics.anisotropy");

    e.lan_epsilon = c.get_real("lan.epsilon");
    const auto lmc = c.get_int("lan.oracle_mc");
    if (lmc < 1) throw ConfigError("lan.oracle_mc: must be at least 1");
    e.lan_oracle_mc = static_cast<std::size_t>(lmc);
    const auto checks = c.get_int("lan.score_checks");
    if (checks < 0) throw ConfigError("lan.score_checks: must be nonnegative");
    e.lan_score_checks = static_cast<std::size_t>(checks);
    e.lan_fd_step = c.get_real("lan.fd_step");
    if (!(e.lan_fd_step > 0.0)) throw ConfigError("lan.fd_step: must be positive");
    e.lan_fd_tolerance = c.get_real("lan.fd_tolerance");

    const auto sreps = c.get_int("simulate.replications");
    if (sreps < 1) throw ConfigError("simulate.replications: must be at least 1");
    e.simulate_replications = static_cast<std::size_t>(sreps);

    // Resolve every cell's shape now so bad combinations fail before any work.
    for (std::size_t i = 0; i < e.horizons.size(); ++i) {
        const std::size_t n = e.dim_rule == DimRule::List ? e.dims.size() : 1;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t d = cell_dim(e, e.horizons[i], j);
            if (e.policy_kind == PolicyKind::LinUCB && !e.gamma && e.horizons[i] < 3) {
                throw ConfigError("policy.gamma=auto needs T >= 3");
            }
            if (e.feature_kind == FeatureKind::Intercept && d != 1) throw ConfigError("intercept features need d = 1");
            if (e.feature_kind == FeatureKind::TabularArms && d < 2) throw ConfigError("tabular features need d >= 2");
            if (e.feature_kind == FeatureKind::ContextArmBasis && d % e.arms != 0) {
                throw ConfigError("context_arm features need d divisible by env.arms");
            }
            if (e.beta_rule == BetaRule::Explicit && e.beta_explicit.size() != d) {
                throw ConfigError("env.beta0: length does not match d = " + std::to_string(d));
            }
            if (e.target_rule == TargetRule::Fixed && !e.nu_fixed.empty() && e.nu_fixed.size() != d) {
                throw ConfigError("target.nu: length does not match d = " + std::to_string(d));
            }
            if (e.target_rule == TargetRule::Orthogonal && d < 2) throw ConfigError("target.rule=orthogonal needs d >= 2");
        }
    }
    return e;
}

std::size_t cell_dim(const ExperimentConfig& cfg, std::size_t horizon, std::size_t list_index) {
    const double t = static_cast<double>(horizon);
    switch (cfg.dim_rule) {
        case DimRule::List: return cfg.dims.at(list_index);
        case DimRule::Exponent:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::pow(t, cfg.dim_exponent) + 1e-9)));
        case DimRule::Fraction:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(t * cfg.dim_fraction + 1e-9)));
    }
    return 1;
}

Cell build_cell(const ExperimentConfig& cfg, std::size_t id, std::size_t horizon, std::size_t dim) {
    return config_guard("cell T=" + std::to_string(horizon) + " d=" + std::to_string(dim), [&] {
        Cell cell;
        cell.id = id;
        cell.horizon = horizon;
        cell.dim = dim;

        FeatureSpec fs;
        fs.kind = cfg.feature_kind;
        ContextLaw law = ContextLaw::none();
        switch (cfg.feature_kind) {
            case FeatureKind::Intercept: break;
            case FeatureKind::TabularArms: fs.arms = dim; break;
            case FeatureKind::ContextArmBasis:
                fs.arms = cfg.arms;
                fs.context_dim = dim / cfg.arms;
                law = ContextLaw::uniform_sphere(fs.context_dim);
                break;
            case FeatureKind::UnitSphereArms:
                fs.arms = cfg.arms;
                fs.dim = dim;
                break;
        }
        const FeatureMap fm = make_feature_map(fs);

        Vector beta(dim, 0.0);
        switch (cfg.beta_rule) {
            case BetaRule::Ones: std::fill(beta.begin(), beta.end(), 1.0); break;
            case BetaRule::E1: beta[0] = 1.0; break;
            case BetaRule::RandomUnit: {
                CounterRng rng(derive_seed(cfg.master_seed, id, kBetaStream));
                for (double& b : beta) b = rng.normal();
                const double n = norm2(beta);
                for (double& b : beta) b /= n;
                break;
            }
            case BetaRule::Explicit: beta = cfg.beta_explicit; break;
        }
        for (double& b : beta) b *= cfg.beta_scale;
        cell.env = Environment::make(fm, beta, cfg.sigma, cfg.noise, law);

        double gamma = 0.0;
        switch (cfg.policy_kind) {
            case PolicyKind::Uniform: cell.policy = PolicySpec::uniform(); break;
            case PolicyKind::EpsilonGreedy: cell.policy = PolicySpec::epsilon_greedy(cfg.epsilon, cfg.ridge_reg); break;
            case PolicyKind::LinUCB:
                gamma = cfg.gamma ? *cfg.gamma : exploration_schedule(horizon, dim, cfg.sigma, cfg.gamma_c);
                cell.policy = PolicySpec::linucb(gamma, cfg.ridge_reg);
                break;
            case PolicyKind::FixedArm: cell.policy = PolicySpec::fixed_arm(cfg.fixed_arm); break;
        }
        cell.policy.ridge_reg = cfg.ridge_reg;
        if (cfg.policy_kind == PolicyKind::FixedArm && cfg.fixed_arm >= fm.candidates_per_round()) {
            throw ConfigError("policy.arm: index out of range");
        }

        Vector nu(dim, 0.0);
        const double nb = norm2(beta);
        switch (cfg.target_rule) {
            case TargetRule::Aligned:
                if (!(nb > 0.0)) throw ZeroSignal("target.rule=aligned needs a nonzero beta0");
                for (std::size_t i = 0; i < dim; ++i) nu[i] = beta[i] / nb;
                break;
            case TargetRule::Orthogonal: {
                if (!(nb > 0.0)) throw ZeroSignal("target.rule=orthogonal needs a nonzero beta0");
                // e_j with the smallest |beta_j|, Gram-Schmidt against beta0
                std::size_t j = 0;
                for (std::size_t i = 1; i < dim; ++i)
                    if (std::abs(beta[i]) < std::abs(beta[j])) j = i;
                nu[j] = 1.0;
                const double proj = beta[j] / (nb * nb);
                for (std::size_t i = 0; i < dim; ++i) nu[i] -= proj * beta[i];
                const double n = norm2(nu);
                for (double& v : nu) v /= n;
                break;
            }
            case TargetRule::Fixed:
                if (cfg.nu_fixed.empty()) nu[0] = 1.0;
                else nu = cfg.nu_fixed;
                break;
        }
        cell.target = TargetSpec::make(nu, to_string(cfg.target_rule));
        cell.truth = dot(cell.target.nu, beta);

        if (cfg.diagnostics) {
            switch (cfg.stabilizer) {
                case StabilizerChoice::LinUCB:
                case StabilizerChoice::LinUCBMainText:
                    if (cfg.policy_kind != PolicyKind::LinUCB) {
                        throw ConfigError("diagnostics.stabilizer=linucb needs policy.kind=linucb");
                    }
                    cell.stabilizer = linucb_target_matrix(
                        beta, horizon, dim, gamma,
                        cfg.stabilizer == StabilizerChoice::LinUCB ? StabilizerForm::Appendix : StabilizerForm::MainText);
                    break;
                case StabilizerChoice::Isotropic:
                    cell.stabilizer = StabilizerMatrix::make(SymMatrix::identity(dim, 1.0 / static_cast<double>(dim)),
                                                             StabilizerSource::UserSupplied);
                    break;
                case StabilizerChoice::Oracle: {
                    SymMatrix pooled =
                        pooled_design_oracle(cell.env, cell.policy, horizon, cfg.oracle_mc,
                                             derive_seed(cfg.master_seed, id, kOracleStream), cfg.workers);
                    if (!Cholesky::is_positive_definite(pooled)) {
                        throw ConfigError("oracle stabilizer: pooled design matrix is singular");
                    }
                    cell.stabilizer = StabilizerMatrix::make(std::move(pooled), StabilizerSource::OracleSigmaBar);
                    break;
                }
            }
        }
        return cell;
    });
}

std::vector<Cell> build_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (std::size_t T : cfg.horizons) {
        const std::size_t n = cfg.dim_rule == DimRule::List ? cfg.dims.size() : 1;
        for (std::size_t j = 0; j < n; ++j) cells.push_back(build_cell(cfg, cells.size(), T, cell_dim(cfg, T, j)));
    }
    return cells;
}

bool interval_covers(double lo, double hi, double truth) {
    const double slack = 1e-12 * (1.0 + std::abs(truth));
    return lo - slack <= truth && truth <= hi + slack;
}

namespace {

bool all_finite(std::initializer_list<double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& cfg, const Cell& cell, std::size_t rep) {
    ReplicationRecord rec;
    rec.cell = cell.id;
    rec.rep = rep;
    rec.seed = replication_seed(cfg.master_seed, cell.id, rep);
    rec.horizon = cell.horizon;
    rec.dim = cell.dim;
    rec.policy = cell.policy.short_name();
    rec.gamma = cell.policy.kind == PolicyKind::LinUCB ? cell.policy.gamma : 0.0;
    rec.target_rule = cell.target.label;
    rec.truth = cell.truth;

    const Trajectory traj = generate_trajectory(cell.env, cell.policy, cell.horizon, rec.seed);

    double lambda_h = kNaN, lambda_alpha = kNaN;
    try {
        lambda_h = cfg.lambda_h.resolve(traj);
        lambda_alpha = cfg.lambda_alpha.resolve(traj);
        rec.estimate = one_step_estimate(traj, cell.target, lambda_h, lambda_alpha, cfg.variance, cfg.level);
        if (!all_finite({rec.estimate.psi_hat, rec.estimate.se})) throw Error(ErrorCode::NonFinite, "non-finite estimate");
        rec.covered = interval_covers(rec.estimate.ci_low, rec.estimate.ci_high, cell.truth);
    } catch (const Error& e) {
        rec.status = to_string(e.code());
    }

    if (cfg.compare_ols) {
        try {
            rec.ols = plugin_ols_estimate(traj, cell.target, cfg.level);
            if (!all_finite({rec.ols.psi_hat, rec.ols.se})) throw Error(ErrorCode::NonFinite, "non-finite estimate");
            rec.ols_covered = interval_covers(rec.ols.ci_low, rec.ols.ci_high, cell.truth);
            rec.ols_status = kOk;
        } catch (const Error& e) {
            rec.ols_status = to_string(e.code());
        }
    }

    if (cfg.diagnostics && cell.stabilizer && std::isfinite(lambda_h) && std::isfinite(lambda_alpha)) {
        try {
            StabilityInputs in;
            in.lambda_h = lambda_h;
            in.lambda_alpha = lambda_alpha;
            in.sigma = cell.env.sigma;
            in.lindeberg_eps = cfg.lindeberg_eps;
            in.gamma = rec.gamma;
            rec.stability = stability_report(traj, cell.target, *cell.stabilizer, cell.env.beta0, in);
            const auto& s = rec.stability;
            rec.remainder_ratio = s.remainder.r_total / s.remainder.threshold;
            if (!all_finite({s.ds_stat, s.riesz_dist, s.riesz_dist_normalized, s.lindeberg, s.remainder.r_total,
                             rec.remainder_ratio})) {
                throw Error(ErrorCode::NonFinite, "non-finite diagnostic");
            }
            rec.diag_status = kOk;
        } catch (const Error& e) {
            rec.diag_status = to_string(e.code());
        }
    }

    if (cfg.anisotropy) {
        try {
            rec.anisotropy = eigen_anisotropy_report(traj, cell.env.beta0, rec.gamma, cell.policy.ridge_reg);
            rec.anis_status = kOk;
        } catch (const Error& e) {
            rec.anis_status = to_string(e.code());
        }
    }
    return rec;
}

CoverageRow coverage_summary(std::span<const ReplicationRecord> records, double truth, double level) {
    CoverageRow row;
    row.level = level;
    if (records.empty()) return row;
    row.horizon = records.front().horizon;
    row.dim = records.front().dim;
    row.policy = records.front().policy;
    row.target_rule = records.front().target_rule;
    row.replications = records.size();

    std::size_t n_ok = 0, n_cov = 0;
    double width = 0.0, sq = 0.0, err = 0.0;
    std::vector<double> z, ds, rd, rr, lb, top, bulk;
    double max_trace = kNaN;
    for (const auto& r : records) {
        if (r.status == kOk) {
            ++n_ok;
            n_cov += r.covered ? 1 : 0;
            const double e = r.estimate.psi_hat - truth;
            width += r.estimate.ci_high - r.estimate.ci_low;
            sq += e * e;
            err += e;
            if (r.estimate.se > 0.0) z.push_back(e / r.estimate.se);
        }
        if (r.diag_status == kOk) {
            ds.push_back(std::abs(r.stability.ds_stat));
            rd.push_back(r.stability.riesz_dist_normalized);
            rr.push_back(r.remainder_ratio);
            lb.push_back(r.stability.lindeberg);
        } else if (r.diag_status != "skipped") {
            ++row.n_diag_failed;
        }
        if (r.anis_status == kOk) {
            top.push_back(r.anisotropy.top_alignment);
            bulk.push_back(r.anisotropy.bulk_ratio_median);
            const double rel = r.anisotropy.trace_check / static_cast<double>(r.horizon);
            max_trace = std::isnan(max_trace) ? rel : std::max(max_trace, rel);
        } else if (r.anis_status != "skipped") {
            ++row.n_diag_failed;
        }
    }
    row.n_failed = records.size() - n_ok;
    const double n = static_cast<double>(n_ok);
    row.coverage = n_ok ? static_cast<double>(n_cov) / n : kNaN;
    row.mean_ci_width = n_ok ? width / n : kNaN;
    row.rmse = n_ok ? std::sqrt(sq / n) : kNaN;
    row.bias = n_ok ? err / n : kNaN;
    row.ks_stat = kNaN;
    row.ks_pvalue = kNaN;
    if (z.size() >= 8) {
        const auto ks = stats::ks_normality(z);
        row.ks_stat = ks.stat;
        row.ks_pvalue = ks.pvalue;
    }
    row.median_ds_stat = stats::median(ds);
    row.median_riesz_dist_norm = stats::median(rd);
    row.median_remainder_ratio = stats::median(rr);
    row.median_lindeberg = stats::median(lb);
    row.median_top_alignment = stats::median(top);
    row.median_bulk_ratio = stats::median(bulk);
    row.max_trace_check_rel = max_trace;
    return row;
}

std::vector<CompareRow> compare_estimators(std::span<const ReplicationRecord> records) {
    std::vector<CompareRow> out;
    if (records.empty()) return out;
    if (std::all_of(records.begin(), records.end(), [](const auto& r) { return r.ols_status == "skipped"; })) return out;

    CompareRow os, ols;
    os.estimator = "one_step";
    ols.estimator = "plugin_ols";
    for (CompareRow* row : {&os, &ols}) {
        row->horizon = records.front().horizon;
        row->dim = records.front().dim;
    }
    double os_sq = 0.0, ols_sq = 0.0, pair_os = 0.0, pair_ols = 0.0;
    std::size_t os_cov = 0, ols_cov = 0, pairs = 0, wins = 0;
    for (const auto& r : records) {
        const bool a = r.status == kOk, b = r.ols_status == kOk;
        const double ea = r.estimate.psi_hat - r.truth, eb = r.ols.psi_hat - r.truth;
        if (a) {
            ++os.n_ok;
            os_sq += ea * ea;
            os_cov += r.covered ? 1 : 0;
        } else {
            ++os.n_failed;
        }
        if (b) {
            ++ols.n_ok;
            ols_sq += eb * eb;
            ols_cov += r.ols_covered ? 1 : 0;
        } else {
            ++ols.n_failed;
        }
        if (a && b) {
            ++pairs;
            pair_os += ea * ea;
            pair_ols += eb * eb;
            wins += std::abs(ea) < std::abs(eb) ? 1 : 0;
        }
    }
    os.rmse = os.n_ok ? std::sqrt(os_sq / static_cast<double>(os.n_ok)) : kNaN;
    ols.rmse = ols.n_ok ? std::sqrt(ols_sq / static_cast<double>(ols.n_ok)) : kNaN;
    os.coverage = os.n_ok ? static_cast<double>(os_cov) / static_cast<double>(os.n_ok) : kNaN;
    ols.coverage = ols.n_ok ? static_cast<double>(ols_cov) / static_cast<double>(ols.n_ok) : kNaN;
    os.rmse_ratio = pairs ? 1.0 : kNaN;
    ols.rmse_ratio = pairs ? (pair_os > 0.0 ? std::sqrt(pair_ols / pair_os) : (pair_ols > 0.0 ? INFINITY : 1.0)) : kNaN;
    const double win = pairs ? static_cast<double>(wins) / static_cast<double>(pairs) : kNaN;
    os.one_step_win_fraction = win;
    ols.one_step_win_fraction = win;
    out.push_back(os);
    out.push_back(ols);
    return out;
}

namespace {

// Calls fn(i) for i in [0, n) on up to `workers` threads; the first exception
// stops the remaining work and is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
    const unsigned threads = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n && !stop; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RecordSink& sink, bool keep_records) {
    ExperimentResult result;
    result.cells = build_cells(cfg);
    const std::size_t reps = cfg.replications;
    const std::size_t total = result.cells.size() * reps;

    // Reorder buffer: records are released strictly in task order.
    std::mutex mutex;
    std::map<std::size_t, ReplicationRecord> pending;
    std::size_t next_emit = 0;
    std::vector<ReplicationRecord> cell_records;
    cell_records.reserve(reps);

    auto release = [&](ReplicationRecord rec) {
        if (sink) sink(rec);
        cell_records.push_back(std::move(rec));
        if (cell_records.size() == reps) {
            const Cell& cell = result.cells[cell_records.front().cell];
            result.rows.push_back(coverage_summary(cell_records, cell.truth, cfg.level));
            if (cfg.compare_ols) {
                for (auto& row : compare_estimators(cell_records)) result.compare.push_back(std::move(row));
            }
            if (keep_records) {
                for (auto& r : cell_records) result.records.push_back(std::move(r));
            }
            cell_records.clear();
        }
    };

    parallel_for(total, cfg.workers, [&](std::size_t i) {
        ReplicationRecord rec = run_replication(cfg, result.cells[i / reps], i % reps);
        std::lock_guard lock(mutex);
        pending.emplace(i, std::move(rec));
        for (auto it = pending.find(next_emit); it != pending.end(); it = pending.find(next_emit)) {
            release(std::move(it->second));
            pending.erase(it);
            ++next_emit;
        }
    });
    return result;
}

namespace {

std::string real(double x) { return format_real(x); }

std::string json_real(double x) { return std::isfinite(x) ? format_real(x) : "null"; }

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string records_csv_header() {
    return "cell,rep,seed,T,d,policy,gamma,target_rule,truth,status,lambda_h,lambda_alpha,psi_hat,psi_plugin,"
           "correction,se,ci_low,ci_high,sigma_hat,variance_method,covered,ols_status,ols_psi_hat,ols_se,ols_ci_low,"
           "ols_ci_high,ols_covered,diag_status,ds_stat,riesz_dist,riesz_dist_normalized,lindeberg,riesz_err,"
           "outcome_err,cross_term,bias_term,r_total,threshold,sigma_tilde,remainder_ratio,anis_status,top_alignment,"
           "bulk_ratio_min,bulk_ratio_median,bulk_ratio_max,trace_check";
}

std::string records_csv_row(const ReplicationRecord& r) {
    std::string row = std::to_string(r.cell) + ',' + std::to_string(r.rep) + ',' + std::to_string(r.seed) + ',' +
                      std::to_string(r.horizon) + ',' + std::to_string(r.dim) + ',' + r.policy + ',' + real(r.gamma) +
                      ',' + r.target_rule + ',' + real(r.truth) + ',' + r.status;
    auto add = [&row](double x) {
        row += ',';
        row += real(x);
    };
    const bool ok = r.status == kOk;
    const auto& e = r.estimate;
    for (double x : {e.lambda_h, e.lambda_alpha, e.psi_hat, e.psi_plugin, e.correction, e.se, e.ci_low, e.ci_high,
                     e.sigma_hat})
        add(ok ? x : kNaN);
    row += ',';
    row += to_string(e.variance_method);
    row += ok ? (r.covered ? ",1" : ",0") : ",nan";

    const bool ols_ok = r.ols_status == kOk;
    row += ',' + r.ols_status;
    for (double x : {r.ols.psi_hat, r.ols.se, r.ols.ci_low, r.ols.ci_high}) add(ols_ok ? x : kNaN);
    row += ols_ok ? (r.ols_covered ? ",1" : ",0") : ",nan";

    const bool diag_ok = r.diag_status == kOk;
    const auto& s = r.stability;
    row += ',' + r.diag_status;
    for (double x : {s.ds_stat, s.riesz_dist, s.riesz_dist_normalized, s.lindeberg, s.remainder.riesz_err,
                     s.remainder.outcome_err, s.remainder.cross_term, s.remainder.bias_term, s.remainder.r_total,
                     s.remainder.threshold, s.sigma_tilde, r.remainder_ratio})
        add(diag_ok ? x : kNaN);

    const bool anis_ok = r.anis_status == kOk;
    const auto& a = r.anisotropy;
    row += ',' + r.anis_status;
    for (double x : {a.top_alignment, a.bulk_ratio_min, a.bulk_ratio_median, a.bulk_ratio_max, a.trace_check})
        add(anis_ok ? x : kNaN);
    return row;
}

std::string summary_csv_header() {
    return "T,d,policy,target_rule,level,replications,n_failed,coverage,mean_ci_width,rmse,bias,ks_stat,ks_pvalue,"
           "median_ds_stat,median_riesz_dist_norm,median_remainder_ratio,median_lindeberg,median_top_alignment,"
           "median_bulk_ratio,max_trace_check_rel,n_diag_failed";
}

std::string summary_csv_row(const CoverageRow& c) {
    std::string row = std::to_string(c.horizon) + ',' + std::to_string(c.dim) + ',' + c.policy + ',' + c.target_rule +
                      ',' + real(c.level) + ',' + std::to_string(c.replications) + ',' + std::to_string(c.n_failed);
    for (double x : {c.coverage, c.mean_ci_width, c.rmse, c.bias, c.ks_stat, c.ks_pvalue, c.median_ds_stat,
                     c.median_riesz_dist_norm, c.median_remainder_ratio, c.median_lindeberg, c.median_top_alignment,
                     c.median_bulk_ratio, c.max_trace_check_rel}) {
        row += ',';
        row += real(x);
    }
    row += ',' + std::to_string(c.n_diag_failed);
    return row;
}

std::string compare_csv_header() { return "estimator,T,d,n_ok,n_failed,rmse,coverage,rmse_ratio,one_step_win_fraction"; }

std::string compare_csv_row(const CompareRow& c) {
    return c.estimator + ',' + std::to_string(c.horizon) + ',' + std::to_string(c.dim) + ',' + std::to_string(c.n_ok) +
           ',' + std::to_string(c.n_failed) + ',' + real(c.rmse) + ',' + real(c.coverage) + ',' + real(c.rmse_ratio) +
           ',' + real(c.one_step_win_fraction);
}

std::string summary_json(const std::vector<CoverageRow>& rows, const std::vector<CompareRow>& compare) {
    std::string out = "{\n  \"cells\": [";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& c = rows[i];
        out += i ? ",\n    {" : "\n    {";
        out += "\"T\": " + std::to_string(c.horizon) + ", \"d\": " + std::to_string(c.dim) +
               ", \"policy\": " + json_string(c.policy) + ", \"target_rule\": " + json_string(c.target_rule) +
               ", \"level\": " + json_real(c.level) + ", \"replications\": " + std::to_string(c.replications) +
               ", \"n_failed\": " + std::to_string(c.n_failed);
        out += ", \"estimate\": {\"coverage\": " + json_real(c.coverage) +
               ", \"mean_ci_width\": " + json_real(c.mean_ci_width) + ", \"rmse\": " + json_real(c.rmse) +
               ", \"bias\": " + json_real(c.bias) + "}";
        out += ", \"normality\": {\"ks_stat\": " + json_real(c.ks_stat) + ", \"ks_pvalue\": " + json_real(c.ks_pvalue) +
               "}";
        out += ", \"stability\": {\"median_ds_stat\": " + json_real(c.median_ds_stat) +
               ", \"median_riesz_dist_norm\": " + json_real(c.median_riesz_dist_norm) +
               ", \"median_remainder_ratio\": " + json_real(c.median_remainder_ratio) +
               ", \"median_lindeberg\": " + json_real(c.median_lindeberg) +
               ", \"median_top_alignment\": " + json_real(c.median_top_alignment) +
               ", \"median_bulk_ratio\": " + json_real(c.median_bulk_ratio) +
               ", \"max_trace_check_rel\": " + json_real(c.max_trace_check_rel) +
               ", \"n_diag_failed\": " + std::to_string(c.n_diag_failed) + "}}";
    }
    out += rows.empty() ? "],\n  \"compare\": [" : "\n  ],\n  \"compare\": [";
    for (std::size_t i = 0; i < compare.size(); ++i) {
        const auto& c = compare[i];
        out += i ? ",\n    {" : "\n    {";
        out += "\"estimator\": " + json_string(c.estimator) + ", \"T\": " + std::to_string(c.horizon) +
               ", \"d\": " + std::to_string(c.dim) + ", \"n_ok\": " + std::to_string(c.n_ok) +
               ", \"n_failed\": " + std::to_string(c.n_failed) + ", \"rmse\": " + json_real(c.rmse) +
               ", \"coverage\": " + json_real(c.coverage) + ", \"rmse_ratio\": " + json_real(c.rmse_ratio) +
               ", \"one_step_win_fraction\": " + json_real(c.one_step_win_fraction) + "}";
    }
    out += compare.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputIOError("cannot open " + path.string() + " for writing");
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw OutputIOError("write failed for " + path.string());
}

}  // namespace

ExperimentResult run_experiment_to_dir(const ExperimentConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputIOError("cannot create " + dir + ": " + ec.message());
    const fs::path base(dir);

    const fs::path records_path = base / "records.csv";
    std::ofstream records = open_out(records_path);
    records << records_csv_header() << '\n';
    ExperimentResult result = run_experiment(cfg, [&](const ReplicationRecord& r) { records << records_csv_row(r) << '\n'; });
    close_out(records, records_path);

    const fs::path summary_path = base / "summary.csv";
    std::ofstream summary = open_out(summary_path);
    summary << summary_csv_header() << '\n';
    for (const auto& row : result.rows) summary << summary_csv_row(row) << '\n';
    close_out(summary, summary_path);

    const fs::path json_path = base / "summary.json";
    std::ofstream json = open_out(json_path);
    json << summary_json(result.rows, result.compare);
    close_out(json, json_path);

    if (cfg.compare_ols) {
        const fs::path compare_path = base / "compare.csv";
        std::ofstream compare = open_out(compare_path);
        compare << compare_csv_header() << '\n';
        for (const auto& row : result.compare) compare << compare_csv_row(row) << '\n';
        close_out(compare, compare_path);
    }
    return result;
}

std::vector<LanSummary> run_lan_check(const ExperimentConfig& cfg) {
    std::vector<LanSummary> out;
    ExperimentConfig base = cfg;
    base.diagnostics = false;
    for (const Cell& cell : build_cells(base)) {
        const SymMatrix pooled =
            pooled_design_oracle(cell.env, cell.policy, cell.horizon, cfg.lan_oracle_mc,
                                 derive_seed(cfg.master_seed, cell.id, kOracleStream), cfg.workers);
        const Vector alpha_bar = alpha_bar_weights(cell.target, pooled);
        const double sb = cell.env.sigma * std::sqrt(std::max(0.0, dot(cell.target.nu, alpha_bar)));
        if (!(sb > 0.0)) throw InvalidArgument("lan check: sigma_bar is zero (sigma = 0?)");

        const std::size_t reps = cfg.replications;
        const std::size_t checks = std::min(cfg.lan_score_checks, reps);
        std::vector<double> lan(reps), cg(reps), fd_err(checks);
        std::vector<char> nonpos(reps);
        const double root_t = std::sqrt(static_cast<double>(cell.horizon));
        parallel_for(reps, cfg.workers, [&](std::size_t rep) {
            const Trajectory traj =
                generate_trajectory(cell.env, cell.policy, cell.horizon, replication_seed(cfg.master_seed, cell.id, rep));
            const LanResult r = lan_log_likelihood_ratio(traj, sb, alpha_bar, cell.env.beta0, cfg.lan_epsilon);
            lan[rep] = r.value;
            nonpos[rep] = r.nonpositive_factor;
            cg[rep] = root_t * canonical_gradient(traj, alpha_bar, cell.env.beta0);
            if (rep < checks) {
                const double h = cfg.lan_fd_step;
                const double up = lan_log_likelihood_ratio(traj, sb, alpha_bar, cell.env.beta0, h).value;
                const double down = lan_log_likelihood_ratio(traj, sb, alpha_bar, cell.env.beta0, -h).value;
                const double score = lan_score(traj, sb, alpha_bar, cell.env.beta0);
                fd_err[rep] = std::abs((up - down) / (2.0 * h) - score) / std::max(1.0, std::abs(score));
            }
        });

        LanSummary s;
        s.horizon = cell.horizon;
        s.dim = cell.dim;
        s.epsilon = cfg.lan_epsilon;
        s.replications = reps;
        s.sigma_bar = sb;
        s.lan_mean = stats::mean(lan);
        s.lan_variance = reps > 1 ? stats::variance(lan) : kNaN;
        s.lan_mean_se = std::sqrt(s.lan_variance / static_cast<double>(reps));
        s.target_mean = -0.5 * cfg.lan_epsilon * cfg.lan_epsilon;
        s.target_variance = cfg.lan_epsilon * cfg.lan_epsilon;
        s.nonpositive_factors = static_cast<std::size_t>(std::count(nonpos.begin(), nonpos.end(), 1));
        s.cg_variance = reps > 1 ? stats::variance(cg) : kNaN;
        s.cg_target = sb * sb;
        s.score_checks = checks;
        for (double e : fd_err) {
            s.score_checks_passed += e <= cfg.lan_fd_tolerance ? 1 : 0;
            s.score_max_rel_err = std::max(s.score_max_rel_err, e);
        }
        out.push_back(s);
    }
    return out;
}

namespace {

const char* kLanColumns =
    "T,d,epsilon,replications,sigma_bar,lan_mean,lan_variance,lan_mean_se,target_mean,target_variance,"
    "nonpositive_factors,cg_variance,cg_target,score_checks,score_checks_passed,score_max_rel_err";

}  // namespace

std::string lan_summary_csv(const std::vector<LanSummary>& rows) {
    std::string out = std::string(kLanColumns) + "\n";
    for (const auto& s : rows) {
        out += std::to_string(s.horizon) + ',' + std::to_string(s.dim) + ',' + real(s.epsilon) + ',' +
               std::to_string(s.replications) + ',' + real(s.sigma_bar) + ',' + real(s.lan_mean) + ',' +
               real(s.lan_variance) + ',' + real(s.lan_mean_se) + ',' + real(s.target_mean) + ',' +
               real(s.target_variance) + ',' + std::to_string(s.nonpositive_factors) + ',' + real(s.cg_variance) + ',' +
               real(s.cg_target) + ',' + std::to_string(s.score_checks) + ',' + std::to_string(s.score_checks_passed) +
               ',' + real(s.score_max_rel_err) + '\n';
    }
    return out;
}

std::string lan_summary_json(const std::vector<LanSummary>& rows) {
    std::string out = "{\n  \"cells\": [";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = rows[i];
        out += i ? ",\n    {" : "\n    {";
        out += "\"T\": " + std::to_string(s.horizon) + ", \"d\": " + std::to_string(s.dim) +
               ", \"epsilon\": " + json_real(s.epsilon) + ", \"replications\": " + std::to_string(s.replications) +
               ", \"sigma_bar\": " + json_real(s.sigma_bar);
        out += ", \"lan\": {\"mean\": " + json_real(s.lan_mean) + ", \"variance\": " + json_real(s.lan_variance) +
               ", \"mean_se\": " + json_real(s.lan_mean_se) + ", \"target_mean\": " + json_real(s.target_mean) +
               ", \"target_variance\": " + json_real(s.target_variance) +
               ", \"nonpositive_factors\": " + std::to_string(s.nonpositive_factors) + "}";
        out += ", \"canonical_gradient\": {\"variance\": " + json_real(s.cg_variance) +
               ", \"target\": " + json_real(s.cg_target) + "}";
        out += ", \"score_check\": {\"checked\": " + std::to_string(s.score_checks) +
               ", \"passed\": " + std::to_string(s.score_checks_passed) +
               ", \"max_rel_err\": " + json_real(s.score_max_rel_err) + "}}";
    }
    out += rows.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
}

}  // namespace adlab
