#include "adlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "adlab/errors.hpp"

namespace adlab {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"env.features", "unit_sphere", "feature map: intercept | tabular | context_arm | unit_sphere"},
        {"env.arms", "32", "candidates per round K (tabular: d = K; context_arm: d = K * context dim)"},
        {"env.sigma", "1", "noise standard deviation sigma (outcome units)"},
        {"env.noise", "gaussian", "noise law: gaussian | rademacher (scaled by sigma)"},
        {"env.beta0", "ones", "truth rule: ones | e1 | random_unit | comma-separated vector"},
        {"env.beta0_scale", "1", "multiplier applied to the beta0 rule"},
        {"policy.kind", "uniform", "uniform | epsilon_greedy | linucb | fixed"},
        {"policy.epsilon", "0.1", "exploration probability of epsilon_greedy"},
        {"policy.gamma", "auto", "LinUCB bonus; auto = c d^2 (sigma sqrt(d + log log T) + 1)"},
        {"policy.gamma_c", "1", "constant c of the automatic gamma schedule"},
        {"policy.ridge_reg", "1", "ridge added to the policy's Gram matrix"},
        {"policy.arm", "0", "candidate index played by the fixed policy"},
        {"target.rule", "aligned", "nu rule: aligned (beta0/|beta0|) | orthogonal | fixed"},
        {"target.nu", "e1", "nu for rule=fixed: e1 or a comma-separated vector"},
        {"experiment.horizons", "400", "comma-separated horizons T (strictly increasing)"},
        {"experiment.dims", "5", "comma-separated dimensions d (dim_rule = list)"},
        {"experiment.dim_rule", "list", "list | exponent (d = floor(T^a)) | fraction (d = floor(f T))"},
        {"experiment.dim_exponent", "0.5", "a for dim_rule = exponent"},
        {"experiment.dim_fraction", "0.5", "f for dim_rule = fraction"},
        {"experiment.replications", "100", "replications per cell"},
        {"experiment.seed", "20240601", "master seed (u64)"},
        {"experiment.level", "0.95", "confidence level of the intervals"},
        {"estimator.lambda_h", "auto", "outcome ridge: auto (causal holdout) | 1/T | d/T | 1/sqrtT | number"},
        {"estimator.lambda_alpha", "1/T", "Riesz ridge: 1/T | d/T | 1/sqrtT | number"},
        {"estimator.variance", "EmpiricalIF", "EmpiricalIF | QuadraticForm"},
        {"estimator.compare_ols", "false", "also run the plug-in OLS estimator on every trajectory"},
        {"diagnostics.enabled", "false", "compute stability diagnostics per replication"},
        {"diagnostics.stabilizer", "linucb", "linucb | linucb_main_text | oracle | isotropic"},
        {"diagnostics.oracle_mc", "200", "Monte Carlo trajectories for the pooled design oracle"},
        {"diagnostics.lindeberg_eps", "0.01", "eps of the Lindeberg statistic"},
        {"diagnostics.anisotropy", "false", "eigen-anisotropy report per replication (unit-norm features)"},
        {"lan.epsilon", "1", "local perturbation size epsilon"},
        {"lan.oracle_mc", "2000", "Monte Carlo trajectories for the pooled design oracle"},
        {"lan.score_checks", "50", "trajectories used for the finite-difference score check"},
        {"lan.fd_step", "1e-4", "finite-difference step in epsilon"},
        {"lan.fd_tolerance", "1e-4", "relative tolerance of the score check"},
        {"simulate.replications", "1", "trajectories written per cell by simulate"},
    };
    return schema;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool known_key(const std::string& key) {
    const auto& schema = config_schema();
    return std::any_of(schema.begin(), schema.end(), [&](const ConfigKey& k) { return k.key == key; });
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Config Config::defaults() {
    Config c;
    for (const auto& k : config_schema()) c.values_[k.key] = k.default_value;
    return c;
}

Config Config::parse(std::istream& in, const std::string& source) {
    Config c = defaults();
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.find('.') == std::string::npos) {
            if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside a section");
            key = section + "." + key;
        }
        if (!known_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
        c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
}

void Config::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = trim(value);
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
    overrides_.push_back(assignment);
}

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second;
}

double Config::get_real(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t used = 0;
    unsigned long long x = 0;
    if (v.empty() || v.front() == '-') throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    try {
        x = std::stoull(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return x;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> Config::get_reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key))) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError(key + ": bad number '" + item + "'");
        }
        if (used != item.size() || !std::isfinite(x)) throw ConfigError(key + ": bad number '" + item + "'");
        out.push_back(x);
    }
    return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(get(key))) {
        std::size_t used = 0;
        unsigned long long x = 0;
        if (item.front() == '-') throw ConfigError(key + ": bad count '" + item + "'");
        try {
            x = std::stoull(item, &used);
        } catch (const std::exception&) {
            throw ConfigError(key + ": bad count '" + item + "'");
        }
        if (used != item.size()) throw ConfigError(key + ": bad count '" + item + "'");
        out.push_back(x);
    }
    return out;
}

std::string Config::dump() const {
    std::string out, section;
    for (const auto& [key, value] : values_) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!out.empty()) out += '\n';
            out += "[" + s + "]\n";
            section = s;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

}  // namespace adlab
