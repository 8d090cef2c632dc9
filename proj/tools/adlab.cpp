// adlab: simulate / estimate / diagnose / coverage / lan-check driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adlab/config.hpp"
#include "adlab/diagnostics.hpp"
#include "adlab/errors.hpp"
#include "adlab/estimators.hpp"
#include "adlab/harness.hpp"
#include "adlab/simd/kernels.hpp"
#include "adlab/trajectory.hpp"
#include "adlab/truth.hpp"

namespace fs = std::filesystem;
using namespace adlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "adlab_out";
    unsigned workers = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
    bool verbose = false;
};

unsigned default_workers() {
    if (const char* env = std::getenv("ADAPTIVE_LAB_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

void add_common(CLI::App* sub, Common& c, bool with_config) {
    if (with_config) {
        sub->add_option("--config", c.config_path, "Config file (sectioned key = value)");
        sub->add_option("--set", c.overrides, "Override one key, e.g. --set env.sigma=0.5 (repeatable)")
            ->allow_extra_args(false);
        sub->add_option("--seed", c.seed, "Master seed (overrides experiment.seed)")
            ->each([&c](const std::string&) { c.seed_given = true; });
    }
    sub->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--workers", c.workers, "Worker threads (default: $ADAPTIVE_LAB_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", c.quiet, "Only errors on stderr");
    sub->add_flag("--verbose", c.verbose, "Progress on stderr");
}

Config resolve_config(const Common& c) {
    Config cfg = c.config_path.empty() ? Config::defaults() : Config::load(c.config_path);
    for (const auto& o : c.overrides) cfg.apply_override(o);
    if (c.seed_given) cfg.apply_override("experiment.seed=" + std::to_string(c.seed));
    return cfg;
}

ExperimentConfig experiment(const Config& cfg, const Common& c) {
    ExperimentConfig e = ExperimentConfig::from_config(cfg);
    e.workers = c.workers;
    return e;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputIOError("cannot create " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputIOError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw OutputIOError("write failed for " + path.string());
}

void write_manifest(const Common& c, const std::string& command, const Config* cfg,
                    const std::vector<std::string>& inputs, const nlohmann::ordered_json& extra = {}) {
    nlohmann::ordered_json m;
    m["tool"] = "adlab";
    m["version"] = ADLAB_VERSION;
    m["command"] = command;
    m["simd_backend"] = std::string(simd::backend_name(simd::active().backend));
    m["workers"] = c.workers;
    if (cfg) {
        m["master_seed"] = cfg->get_u64("experiment.seed");
        m["overrides"] = cfg->overrides();
        m["config"] = cfg->dump();
        if (!c.config_path.empty()) m["config_path"] = c.config_path;
    }
    if (!inputs.empty()) m["inputs"] = inputs;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_text(fs::path(c.out_dir) / "manifest.json", m.dump(2) + "\n");
}

TruthRecord truth_of(const Cell& cell) {
    TruthRecord t;
    t.horizon = cell.horizon;
    t.dim = cell.dim;
    t.beta0 = cell.env.beta0;
    t.sigma = cell.env.sigma;
    t.nu = cell.target.nu;
    t.truth = cell.truth;
    t.gamma = cell.policy.kind == PolicyKind::LinUCB ? cell.policy.gamma : 0.0;
    t.ridge_reg = cell.policy.ridge_reg;
    t.policy = cell.policy.descriptor();
    return t;
}

int cmd_simulate(const Common& c) {
    const Config cfg = resolve_config(c);
    const ExperimentConfig e = experiment(cfg, c);
    ensure_dir(c.out_dir);
    std::vector<std::string> files;
    for (const Cell& cell : build_cells(e)) {
        const std::string stem = "c" + std::to_string(cell.id);
        save_truth((fs::path(c.out_dir) / ("truth_" + stem + ".txt")).string(), truth_of(cell));
        for (std::size_t rep = 0; rep < e.simulate_replications; ++rep) {
            const Trajectory traj = generate_trajectory(cell.env, cell.policy, cell.horizon,
                                                        replication_seed(e.master_seed, cell.id, rep));
            const std::string name = "traj_" + stem + "_r" + std::to_string(rep) + ".csv";
            save_trajectory((fs::path(c.out_dir) / name).string(), traj);
            files.push_back(name);
            if (c.verbose) std::cerr << "wrote " << name << '\n';
        }
    }
    write_manifest(c, "simulate", &cfg, {}, {{"outputs", files}});
    if (!c.quiet) std::cout << "simulate: " << files.size() << " trajectories in " << c.out_dir << '\n';
    return kExitOk;
}

struct FileArgs {
    std::vector<std::string> trajectories;
    std::string truth_path;
    std::string nu = "e1";
    std::string lambda_h = "auto";
    std::string lambda_alpha = "1/T";
    std::string variance = "EmpiricalIF";
    double level = 0.95;
    bool ols = false;
    std::string stabilizer = "linucb";
    double lindeberg_eps = 0.01;
    bool use_sigma_hat = false;
};

Vector resolve_nu(const FileArgs& a, std::size_t dim, const TruthRecord* truth) {
    if (truth && a.nu == "e1") return truth->nu;
    Vector nu(dim, 0.0);
    if (a.nu == "e1") {
        nu[0] = 1.0;
        return nu;
    }
    nu.clear();
    for (const auto& item : split_list(a.nu)) {
        try {
            nu.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("--nu: bad number '" + item + "'");
        }
    }
    if (nu.size() != dim) throw ConfigError("--nu: length does not match the trajectory dimension");
    return nu;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

LambdaRule rule_arg(const std::string& flag, const std::string& text) {
    try {
        return LambdaRule::parse(text);
    } catch (const Error& e) {
        throw ConfigError(flag + ": " + e.what());
    }
}

int cmd_estimate(const Common& c, const FileArgs& a) {
    const LambdaRule lh = rule_arg("--lambda-h", a.lambda_h);
    const LambdaRule la = rule_arg("--lambda-alpha", a.lambda_alpha);
    VarianceMethod method;
    try {
        method = parse_variance_method(a.variance);
    } catch (const Error& e) {
        throw ConfigError(std::string("--variance: ") + e.what());
    }
    std::optional<TruthRecord> truth;
    if (!a.truth_path.empty()) truth = load_truth(a.truth_path);
    ensure_dir(c.out_dir);

    std::string csv = estimate_csv_header() + '\n';
    std::string ols_csv = estimate_csv_header() + '\n';
    for (const auto& path : a.trajectories) {
        const Trajectory traj = load_trajectory(path);
        const TargetSpec target = TargetSpec::make(resolve_nu(a, traj.dim(), truth ? &*truth : nullptr));
        const EstimateReport rep =
            one_step_estimate(traj, target, lh.resolve(traj), la.resolve(traj), method, a.level);
        csv += estimate_csv_row(traj, rep) + '\n';
        write_text(fs::path(c.out_dir) / ("estimate_" + stem_of(path) + ".json"), estimate_json(traj, rep) + "\n");
        if (a.ols) {
            const EstimateReport ols = plugin_ols_estimate(traj, target, a.level);
            ols_csv += estimate_csv_row(traj, ols) + '\n';
        }
        if (!c.quiet) {
            std::printf("%s psi_hat=%.10g se=%.6g ci=[%.10g, %.10g]\n", stem_of(path).c_str(), rep.psi_hat, rep.se,
                        rep.ci_low, rep.ci_high);
        }
    }
    write_text(fs::path(c.out_dir) / "estimates.csv", csv);
    if (a.ols) write_text(fs::path(c.out_dir) / "estimates_ols.csv", ols_csv);
    nlohmann::ordered_json extra;
    extra["lambda_h"] = lh.to_string();
    extra["lambda_alpha"] = la.to_string();
    extra["variance_method"] = to_string(method);
    extra["level"] = a.level;
    extra["nu"] = a.nu;
    if (truth) extra["truth_file"] = a.truth_path;
    write_manifest(c, "estimate", nullptr, a.trajectories, extra);
    return kExitOk;
}

int cmd_diagnose(const Common& c, const FileArgs& a) {
    if (a.truth_path.empty()) throw ConfigError("diagnose needs --truth");
    const TruthRecord truth = load_truth(a.truth_path);
    const LambdaRule lh = rule_arg("--lambda-h", a.lambda_h);
    const LambdaRule la = rule_arg("--lambda-alpha", a.lambda_alpha);
    ensure_dir(c.out_dir);

    std::string csv = stability_csv_header() + '\n';
    for (const auto& path : a.trajectories) {
        const Trajectory traj = load_trajectory(path);
        if (traj.dim() != truth.dim) throw DataError(path + ": dimension does not match the truth file");
        const TargetSpec target = TargetSpec::make(resolve_nu(a, traj.dim(), &truth));
        StabilizerMatrix stab;
        if (a.stabilizer == "linucb" || a.stabilizer == "linucb_main_text") {
            if (!(truth.gamma > 0.0)) throw ConfigError("--stabilizer linucb needs gamma > 0 in the truth file");
            stab = linucb_target_matrix(truth.beta0, traj.horizon(), traj.dim(), truth.gamma,
                                        a.stabilizer == "linucb" ? StabilizerForm::Appendix : StabilizerForm::MainText);
        } else if (a.stabilizer == "isotropic") {
            stab = StabilizerMatrix::make(SymMatrix::identity(traj.dim(), 1.0 / static_cast<double>(traj.dim())));
        } else {
            throw ConfigError("--stabilizer: expected linucb, linucb_main_text or isotropic");
        }
        StabilityInputs in;
        in.lambda_h = lh.resolve(traj);
        in.lambda_alpha = la.resolve(traj);
        in.sigma = truth.sigma;
        if (a.use_sigma_hat) in.sigma = std::sqrt(estimate_noise_variance(traj, fit_outcome_ridge(traj, in.lambda_h)));
        in.lindeberg_eps = a.lindeberg_eps;
        in.gamma = truth.gamma;
        const StabilityReport rep = stability_report(traj, target, stab, truth.beta0, in);
        csv += stability_csv_row(traj, rep) + '\n';
        write_text(fs::path(c.out_dir) / ("stability_" + stem_of(path) + ".json"), stability_json(traj, rep) + "\n");
        if (!c.quiet) {
            std::printf("%s ds_stat=%.6g riesz_dist_norm=%.6g r_total/threshold=%.6g\n", stem_of(path).c_str(),
                        rep.ds_stat, rep.riesz_dist_normalized, rep.remainder.r_total / rep.remainder.threshold);
        }
    }
    write_text(fs::path(c.out_dir) / "stability.csv", csv);
    nlohmann::ordered_json extra;
    extra["truth_file"] = a.truth_path;
    extra["stabilizer"] = a.stabilizer;
    extra["lambda_h"] = lh.to_string();
    extra["lambda_alpha"] = la.to_string();
    extra["lindeberg_eps"] = a.lindeberg_eps;
    extra["sigma"] = a.use_sigma_hat ? "estimated" : "truth";
    write_manifest(c, "diagnose", nullptr, a.trajectories, extra);
    return kExitOk;
}

int cmd_coverage(const Common& c) {
    const Config cfg = resolve_config(c);
    const ExperimentConfig e = experiment(cfg, c);
    const ExperimentResult result = run_experiment_to_dir(e, c.out_dir);
    write_manifest(c, "coverage", &cfg, {});
    if (!c.quiet) {
        for (const auto& row : result.rows) {
            std::printf("T=%zu d=%zu policy=%s coverage=%.4f rmse=%.6g ks_p=%.4g n_failed=%zu\n", row.horizon, row.dim,
                        row.policy.c_str(), row.coverage, row.rmse, row.ks_pvalue, row.n_failed);
        }
        for (const auto& row : result.compare) {
            std::printf("compare %s T=%zu d=%zu rmse=%.6g n_failed=%zu one_step_wins=%.4f\n", row.estimator.c_str(),
                        row.horizon, row.dim, row.rmse, row.n_failed, row.one_step_win_fraction);
        }
    }
    return kExitOk;
}

int cmd_lan_check(const Common& c) {
    const Config cfg = resolve_config(c);
    const ExperimentConfig e = experiment(cfg, c);
    const auto rows = run_lan_check(e);
    ensure_dir(c.out_dir);
    write_text(fs::path(c.out_dir) / "lan_summary.csv", lan_summary_csv(rows));
    write_text(fs::path(c.out_dir) / "lan_summary.json", lan_summary_json(rows));
    write_manifest(c, "lan-check", &cfg, {});
    if (!c.quiet) {
        for (const auto& s : rows) {
            std::printf("T=%zu d=%zu eps=%g: mean %.5f (target %.5f, se %.5f)  variance %.5f (target %.5f)\n",
                        s.horizon, s.dim, s.epsilon, s.lan_mean, s.target_mean, s.lan_mean_se, s.lan_variance,
                        s.target_variance);
            std::printf("  canonical gradient variance %.6g vs sigma_bar^2 %.6g; score check %zu/%zu (max rel err %.2e)\n",
                        s.cg_variance, s.cg_target, s.score_checks_passed, s.score_checks, s.score_max_rel_err);
        }
    }
    return kExitOk;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::InvalidSpec:
        case ErrorCode::InvalidArgument: return kExitConfig;
        case ErrorCode::OutputIOError: return kExitOther;
        default: return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and estimation toolkit for linear targets after adaptive data collection"};
    app.set_version_flag("--version", std::string("adlab ") + ADLAB_VERSION);
    app.require_subcommand(1);

    Common common;
    common.workers = default_workers();
    FileArgs files;

    auto* sim = app.add_subcommand("simulate", "Generate and store trajectories plus truth files");
    add_common(sim, common, true);

    auto* est = app.add_subcommand("estimate", "One-step estimates from stored trajectories");
    add_common(est, common, false);
    est->add_option("trajectories", files.trajectories, "Trajectory files")->required()->check(CLI::ExistingFile);
    est->add_option("--truth", files.truth_path, "Truth file (supplies nu)")->check(CLI::ExistingFile);
    est->add_option("--nu", files.nu, "Target direction: e1 or comma-separated vector")->capture_default_str();
    est->add_option("--lambda-h", files.lambda_h, "auto | 1/T | d/T | 1/sqrtT | number")->capture_default_str();
    est->add_option("--lambda-alpha", files.lambda_alpha, "1/T | d/T | 1/sqrtT | number")->capture_default_str();
    est->add_option("--variance", files.variance, "EmpiricalIF | QuadraticForm")->capture_default_str();
    est->add_option("--level", files.level, "Confidence level")->capture_default_str();
    est->add_flag("--ols", files.ols, "Also write plug-in OLS estimates");

    auto* diag = app.add_subcommand("diagnose", "Stability diagnostics for stored trajectories");
    add_common(diag, common, false);
    diag->add_option("trajectories", files.trajectories, "Trajectory files")->required()->check(CLI::ExistingFile);
    diag->add_option("--truth", files.truth_path, "Truth file")->required()->check(CLI::ExistingFile);
    diag->add_option("--nu", files.nu, "Target direction (default: from the truth file)");
    diag->add_option("--stabilizer", files.stabilizer, "linucb | linucb_main_text | isotropic")->capture_default_str();
    diag->add_option("--lambda-h", files.lambda_h, "auto | 1/T | d/T | 1/sqrtT | number")->capture_default_str();
    diag->add_option("--lambda-alpha", files.lambda_alpha, "1/T | d/T | 1/sqrtT | number")->capture_default_str();
    diag->add_option("--lindeberg-eps", files.lindeberg_eps, "eps of the Lindeberg statistic")->capture_default_str();
    diag->add_flag("--sigma-hat", files.use_sigma_hat, "Use the estimated noise scale instead of the truth");

    auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage experiment");
    add_common(cov, common, true);

    auto* lan = app.add_subcommand("lan-check", "LAN statistic and canonical-gradient variance check");
    add_common(lan, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (common.quiet && common.verbose) throw ConfigError("--quiet and --verbose are exclusive");
        if (*sim) return cmd_simulate(common);
        if (*est) return cmd_estimate(common, files);
        if (*diag) return cmd_diagnose(common, files);
        if (*cov) return cmd_coverage(common);
        if (*lan) return cmd_lan_check(common);
    } catch (const Error& e) {
        std::cerr << "adlab: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "adlab: " << e.what() << '\n';
        return kExitOther;
    }
    return kExitOther;
}
