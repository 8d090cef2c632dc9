// Acceptance runner: one PASS/FAIL line per criterion, exit 1 on any failure.
// Usage: acceptance CONFIG_DIR UNIT_TEST_BINARY

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "adlab/config.hpp"
#include "adlab/harness.hpp"
#include "adlab/stats.hpp"
#include "adlab/trajectory.hpp"

using namespace adlab;

namespace {

std::string g_config_dir;
std::string g_unit_binary;
unsigned g_workers = 1;

struct Outcome {
    bool pass = false;
    std::string detail;
};

ExperimentConfig load(const std::string& name) {
    ExperimentConfig e = ExperimentConfig::from_config(Config::load(g_config_dir + "/" + name));
    e.workers = g_workers;
    return e;
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// Runtime limits are stated for the given worker count; fewer workers only
// make the check stricter.
bool within(double seconds, double limit) { return seconds < limit; }

Outcome check_classical_mean() {
    const Stopwatch sw;
    ExperimentConfig e = load("mean_d1.cfg");
    e.workers = 1;
    const ExperimentResult res = run_experiment(e, {}, true);
    const double secs = sw.seconds();
    const Cell& cell = res.cells.at(0);
    double max_gap = 0.0;
    std::size_t failed = 0;
    for (const auto& r : res.records) {
        if (r.status != kOk) {
            ++failed;
            continue;
        }
        const Trajectory tr = generate_trajectory(cell.env, cell.policy, cell.horizon, r.seed);
        double ybar = 0.0;
        for (std::size_t t = 0; t < tr.horizon(); ++t) ybar += tr.outcome(t);
        ybar /= static_cast<double>(tr.horizon());
        max_gap = std::max(max_gap, std::abs(r.estimate.psi_hat - ybar));
    }
    const CoverageRow& row = res.rows.at(0);
    Outcome o;
    o.pass = failed == 0 && res.records.size() == 2000 && max_gap <= 1e-8 && row.coverage >= 0.93 &&
             row.coverage <= 0.97 && row.ks_pvalue > 0.01 && within(secs, 30.0);
    o.detail = fmt("max|psi-Ybar|=%.2e coverage=%.4f ks_p=%.4f", max_gap, row.coverage, row.ks_pvalue) +
               fmt(" time=%.1fs (1 worker, limit 30s)", secs);
    return o;
}

Outcome check_normality_iid() {
    const Stopwatch sw;
    const ExperimentResult res = run_experiment(load("normality_d5.cfg"));
    const double secs = sw.seconds();
    const CoverageRow& row = res.rows.at(0);
    Outcome o;
    o.pass = row.n_failed == 0 && row.ks_pvalue > 0.01 && row.coverage >= 0.92 && row.coverage <= 0.98 &&
             within(secs, 300.0);
    o.detail = fmt("coverage=%.4f ks_p=%.4f time=%.1fs (limit 300s)", row.coverage, row.ks_pvalue, secs);
    return o;
}

// Criteria 3-5 share one LinUCB experiment.
struct LinucbRuns {
    ExperimentResult result;
    double seconds = 0.0;
    std::string error;
};

const LinucbRuns& linucb_runs() {
    static const LinucbRuns runs = [] {
        LinucbRuns r;
        try {
            const Stopwatch sw;
            r.result = run_experiment(load("linucb_stability.cfg"), {}, true);
            r.seconds = sw.seconds();
        } catch (const std::exception& ex) {
            r.error = ex.what();
        }
        return r;
    }();
    if (!runs.error.empty()) throw std::runtime_error(runs.error);
    return runs;
}

bool strictly_decreasing(double a, double b, double c) { return a > b && b > c; }

Outcome check_directional_stability() {
    const LinucbRuns& runs = linucb_runs();
    const auto& rows = runs.result.rows;
    if (rows.size() != 3) return {false, "expected three horizons"};
    std::size_t diag_failed = 0;
    for (const auto& r : rows) diag_failed += r.n_diag_failed;
    Outcome o;
    o.pass = strictly_decreasing(rows[0].median_riesz_dist_norm, rows[1].median_riesz_dist_norm,
                                 rows[2].median_riesz_dist_norm) &&
             strictly_decreasing(rows[0].median_ds_stat, rows[1].median_ds_stat, rows[2].median_ds_stat) &&
             rows[2].coverage >= 0.90 && diag_failed == 0 && within(runs.seconds, 1800.0);
    o.detail = fmt("riesz_dist_norm %.4f > %.4f > %.4f", rows[0].median_riesz_dist_norm,
                   rows[1].median_riesz_dist_norm, rows[2].median_riesz_dist_norm) +
               fmt("; |ds| %.4f > %.4f > %.4f", rows[0].median_ds_stat, rows[1].median_ds_stat,
                   rows[2].median_ds_stat) +
               fmt("; coverage(T=32000)=%.4f; time=%.1fs (limit 1800s)", rows[2].coverage, runs.seconds);
    return o;
}

Outcome check_eigen_anisotropy() {
    const LinucbRuns& runs = linucb_runs();
    double worst_trace = 0.0;
    std::size_t checked = 0;
    for (const auto& r : runs.result.records) {
        if (r.anis_status != kOk) return {false, "anisotropy failed on a replication: " + r.anis_status};
        worst_trace = std::max(worst_trace, r.anisotropy.trace_check / static_cast<double>(r.horizon));
        ++checked;
    }
    const auto& rows = runs.result.rows;
    const double bulk = rows.at(2).median_bulk_ratio;
    Outcome o;
    o.pass = checked == 600 && worst_trace <= 1e-6 && bulk >= 0.5 && bulk <= 2.0 &&
             rows[2].median_top_alignment < rows[0].median_top_alignment;
    o.detail = fmt("max|Tr(T Sigma_hat)-T|/T=%.2e bulk_ratio(T=32000)=%.4f", worst_trace, bulk) +
               fmt(" top_misalignment %.4f (T=2000) -> %.4f (T=32000)", rows[0].median_top_alignment,
                   rows[2].median_top_alignment);
    return o;
}

Outcome check_remainder_decay() {
    const auto& rows = linucb_runs().result.rows;
    Outcome o;
    o.pass = strictly_decreasing(rows.at(0).median_remainder_ratio, rows.at(1).median_remainder_ratio,
                                 rows.at(2).median_remainder_ratio);
    o.detail = fmt("median r_total/(sigma_tilde/sqrt T): %.4f > %.4f > %.4f", rows[0].median_remainder_ratio,
                   rows[1].median_remainder_ratio, rows[2].median_remainder_ratio);
    return o;
}

Outcome check_canonical_gradient() {
    const Stopwatch sw;
    const auto rows = run_lan_check(load("canonical_gradient.cfg"));
    const double secs = sw.seconds();
    const LanSummary& s = rows.at(0);
    const double rel = std::abs(s.cg_variance - s.cg_target) / s.cg_target;
    Outcome o;
    o.pass = s.replications == 5000 && rel <= 0.05 && within(secs, 600.0);
    o.detail = fmt("var(sqrt T D*)=%.5f sigma^2 nu'Sigma_bar^+ nu=%.5f rel_diff=%.4f", s.cg_variance, s.cg_target,
                   rel) +
               fmt(" time=%.1fs (limit 600s)", secs);
    return o;
}

Outcome check_lan() {
    const auto rows = run_lan_check(load("lan_check.cfg"));
    const LanSummary& s = rows.at(0);
    const double z = std::abs(s.lan_mean - s.target_mean) / s.lan_mean_se;
    const double rel_var = std::abs(s.lan_variance - s.target_variance) / s.target_variance;
    Outcome o;
    o.pass = s.replications == 2000 && z <= 3.0 && rel_var <= 0.15 && s.score_checks == 50 &&
             s.score_checks_passed == s.score_checks;
    o.detail = fmt("mean=%.4f (%.2f se from -0.5) variance=%.4f", s.lan_mean, z, s.lan_variance) +
               fmt(" score checks %.0f/%.0f", static_cast<double>(s.score_checks_passed),
                   static_cast<double>(s.score_checks));
    return o;
}

Outcome check_high_dim_gap() {
    const ExperimentResult res = run_experiment(load("high_dim_gap.cfg"));
    const CompareRow* os = nullptr;
    const CompareRow* ols = nullptr;
    for (const auto& c : res.compare) (c.estimator == "one_step" ? os : ols) = &c;
    if (!os || !ols) return {false, "comparison rows missing"};
    Outcome o;
    o.pass = os->dim == 200 && os->n_failed == 0 && os->n_ok == 200 && os->one_step_win_fraction >= 0.8;
    o.detail = fmt("d=%.0f one-step wins %.4f of pairs; rmse one-step %.4f", static_cast<double>(os->dim),
                   os->one_step_win_fraction, os->rmse) +
               fmt(" vs OLS %.4f; n_failed one-step=%.0f", ols->rmse, static_cast<double>(os->n_failed)) +
               fmt(" OLS=%.0f", static_cast<double>(ols->n_failed));
    return o;
}

Outcome check_unit_suites() {
    const Stopwatch sw;
    const std::string cmd = "ADAPTIVE_LAB_WORKERS=1 \"" + g_unit_binary + "\" --minimal --no-version";
    const int rc = std::system(cmd.c_str());
    const double secs = sw.seconds();
    Outcome o;
    o.pass = rc == 0 && within(secs, 600.0);
    o.detail = std::string("unit and property suites ") + (rc == 0 ? "passed" : "failed") +
               fmt(" in %.1fs (1 worker, limit 600s)", secs);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: %s CONFIG_DIR UNIT_TEST_BINARY\n", argv[0]);
        return 2;
    }
    g_config_dir = argv[1];
    g_unit_binary = argv[2];
    if (const char* env = std::getenv("ADAPTIVE_LAB_WORKERS")) g_workers = std::max(1, std::atoi(env));
    else g_workers = std::max(1u, std::thread::hardware_concurrency());

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 classical-case recovery", check_classical_mean},
        {"2 normality under i.i.d.-like design", check_normality_iid},
        {"3 directional stability under LinUCB", check_directional_stability},
        {"4 eigen-anisotropy", check_eigen_anisotropy},
        {"5 von Mises remainder decay", check_remainder_decay},
        {"6 canonical-gradient variance", check_canonical_gradient},
        {"7 LAN check", check_lan},
        {"8 high-dimensional gap", check_high_dim_gap},
        {"9 unit and property suites", check_unit_suites},
    };
    std::printf("acceptance: %u worker(s), configs from %s\n", g_workers, g_config_dir.c_str());
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("error: ") + ex.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
