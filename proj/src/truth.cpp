#include "adlab/truth.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "adlab/environment.hpp"
#include "adlab/errors.hpp"
#include "adlab/estimators.hpp"

namespace adlab {

void write_truth(std::ostream& out, const TruthRecord& t) {
    out << "# adlab truth v1\n";
    out << "T = " << t.horizon << '\n';
    out << "d = " << t.dim << '\n';
    out << "beta0 = " << format_vector(t.beta0) << '\n';
    out << "sigma = " << format_real(t.sigma) << '\n';
    out << "nu = " << format_vector(t.nu) << '\n';
    out << "truth = " << format_real(t.truth) << '\n';
    out << "gamma = " << format_real(t.gamma) << '\n';
    out << "ridge_reg = " << format_real(t.ridge_reg) << '\n';
    out << "policy = " << t.policy << '\n';
    if (!out) throw OutputIOError("write_truth: stream failure");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw DataError("truth file: bad number for " + key);
    }
    if (used != v.size()) throw DataError("truth file: bad number for " + key);
    return x;
}

Vector to_vector(const std::string& key, const std::string& v) {
    Vector out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
    if (out.empty()) throw DataError("truth file: empty vector for " + key);
    return out;
}

}  // namespace

TruthRecord read_truth(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("truth file: expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw DataError("truth file: missing " + key);
        return it->second;
    };
    TruthRecord t;
    t.horizon = static_cast<std::size_t>(to_real("T", need("T")));
    t.dim = static_cast<std::size_t>(to_real("d", need("d")));
    t.beta0 = to_vector("beta0", need("beta0"));
    t.sigma = to_real("sigma", need("sigma"));
    t.nu = to_vector("nu", need("nu"));
    t.truth = to_real("truth", need("truth"));
    if (kv.count("gamma")) t.gamma = to_real("gamma", kv["gamma"]);
    if (kv.count("ridge_reg")) t.ridge_reg = to_real("ridge_reg", kv["ridge_reg"]);
    if (kv.count("policy")) t.policy = kv["policy"];
    if (t.beta0.size() != t.dim || t.nu.size() != t.dim) throw DataError("truth file: vector length does not match d");
    return t;
}

void save_truth(const std::string& path, const TruthRecord& truth) {
    std::ofstream out(path);
    if (!out) throw OutputIOError("cannot open " + path + " for writing");
    write_truth(out, truth);
}

TruthRecord load_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_truth(in);
}

}  // namespace adlab
