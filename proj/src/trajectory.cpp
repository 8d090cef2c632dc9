#include "adlab/trajectory.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "adlab/errors.hpp"
#include "adlab/simd/kernels.hpp"

namespace adlab {

void Trajectory::reserve(std::size_t horizon) {
    actions_.reserve(horizon);
    features_.reserve(horizon * dim_);
    outcomes_.reserve(horizon);
    propensities_.reserve(horizon);
}

void Trajectory::append(std::size_t action_index, std::span<const double> feature, double outcome, double propensity) {
    if (feature.size() != dim_) throw InvalidArgument("Trajectory::append: feature dimension mismatch");
    actions_.push_back(action_index);
    features_.insert(features_.end(), feature.begin(), feature.end());
    outcomes_.push_back(outcome);
    propensities_.push_back(propensity);
}

Observation Trajectory::observation(std::size_t t) const {
    if (t >= horizon()) throw InvalidArgument("Trajectory::observation: index out of range");
    return {t + 1, actions_[t], feature(t), outcomes_[t], propensities_[t]};
}

Trajectory Trajectory::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > horizon()) throw InvalidArgument("Trajectory::slice: bad range");
    Trajectory out(dim_);
    out.env_descriptor = env_descriptor;
    out.policy_descriptor = policy_descriptor;
    out.env_hash = env_hash;
    out.policy_hash = policy_hash;
    out.seed = seed;
    out.reserve(end - begin);
    for (std::size_t t = begin; t < end; ++t) out.append(actions_[t], feature(t), outcomes_[t], propensities_[t]);
    return out;
}

Trajectory Trajectory::prefix(std::size_t rounds) const { return slice(0, rounds); }

Trajectory generate_trajectory(const Environment& env, const PolicySpec& policy, std::size_t horizon, std::uint64_t seed) {
    if (horizon == 0) throw InvalidArgument("generate_trajectory: horizon must be at least 1");
    const std::size_t d = env.features.dim();
    CounterRng rng(seed);
    PolicyState state(policy, d);
    CandidateSet candidates;

    Trajectory traj(d);
    traj.env_descriptor = env.descriptor();
    traj.policy_descriptor = policy.descriptor();
    traj.env_hash = fnv1a64(traj.env_descriptor);
    traj.policy_hash = fnv1a64(traj.policy_descriptor);
    traj.seed = seed;
    traj.reserve(horizon);

    for (std::size_t t = 0; t < horizon; ++t) {
        sample_candidates(env.features, env.context_law, rng, candidates);
        const Selection sel = state.select_action(candidates, rng);
        const auto phi = candidates[sel.index];
        const double y = sample_outcome(env, phi, rng);
        state.update(phi, y);
        traj.append(sel.index, phi, y, sel.propensity);
    }
    return traj;
}

SymMatrix empirical_gram(const Trajectory& traj) {
    if (traj.horizon() == 0) throw InvalidArgument("empirical_gram: empty trajectory");
    SymMatrix g(traj.dim());
    for (std::size_t t = 0; t < traj.horizon(); ++t) g.rank_one_update(traj.feature(t), 1.0);
    g.scale(1.0 / static_cast<double>(traj.horizon()));
    return g;
}

Vector empirical_cross_moment(const Trajectory& traj) {
    if (traj.horizon() == 0) throw InvalidArgument("empirical_cross_moment: empty trajectory");
    Vector s(traj.dim(), 0.0);
    for (std::size_t t = 0; t < traj.horizon(); ++t) simd::axpy(traj.outcome(t), traj.feature(t), s);
    simd::scale(1.0 / static_cast<double>(traj.horizon()), s);
    return s;
}

SymMatrix pooled_design_oracle(const Environment& env, const PolicySpec& policy, std::size_t horizon, std::size_t n_mc,
                               std::uint64_t seed, unsigned workers) {
    if (n_mc == 0) throw InvalidArgument("pooled_design_oracle: n_mc must be at least 1");
    const std::size_t d = env.features.dim();
    // Per-replication grams are summed in index order so the result does not
    // depend on the worker count.
    std::vector<SymMatrix> grams(n_mc);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n_mc; i = next++) {
            grams[i] = empirical_gram(generate_trajectory(env, policy, horizon, derive_seed(seed, 0, i)));
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_mc)));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (n_mc == 1) return grams.front();
    SymMatrix total(d);
    for (const auto& g : grams) total += g;
    total.scale(1.0 / static_cast<double>(n_mc));
    return total;
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, traj.env_hash);
    out << "adlab-trajectory v1 T=" << traj.horizon() << " d=" << traj.dim() << " env_hash=" << buf;
    std::snprintf(buf, sizeof buf, "%016" PRIx64, traj.policy_hash);
    out << " policy_hash=" << buf << " seed=" << traj.seed << '\n';
    std::string line;
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        line.clear();
        line += std::to_string(t + 1);
        line += ',';
        line += std::to_string(traj.action(t));
        for (double x : traj.feature(t)) {
            std::snprintf(buf, sizeof buf, ",%.17g", x);
            line += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g", traj.outcome(t));
        line += buf;
        std::snprintf(buf, sizeof buf, ",%.17g\n", traj.propensity(t));
        line += buf;
        out << line;
    }
    if (!out) throw OutputIOError("write_trajectory: stream failure");
}

namespace {

std::string header_field(const std::string& header, const std::string& key) {
    const std::string needle = " " + key + "=";
    const auto pos = header.find(needle);
    if (pos == std::string::npos) throw DataError("trajectory header lacks " + key);
    const auto start = pos + needle.size();
    const auto end = header.find(' ', start);
    return header.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

double parse_real(const std::string& token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        throw DataError("trajectory: bad number '" + token + "'");
    }
    if (used != token.size()) throw DataError("trajectory: bad number '" + token + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& token, int base = 10) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(token, &used, base);
    } catch (const std::exception&) {
        throw DataError("trajectory: bad integer '" + token + "'");
    }
    if (used != token.size()) throw DataError("trajectory: bad integer '" + token + "'");
    return v;
}

}  // namespace

Trajectory read_trajectory(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("adlab-trajectory v1", 0) != 0) {
        throw DataError("trajectory: missing 'adlab-trajectory v1' header");
    }
    const std::size_t horizon = parse_u64(header_field(header, "T"));
    const std::size_t d = parse_u64(header_field(header, "d"));
    Trajectory traj(d);
    traj.env_hash = parse_u64(header_field(header, "env_hash"), 16);
    traj.policy_hash = parse_u64(header_field(header, "policy_hash"), 16);
    traj.seed = parse_u64(header_field(header, "seed"));
    traj.reserve(horizon);

    std::string line, token;
    Vector feature(d);
    for (std::size_t t = 0; t < horizon; ++t) {
        if (!std::getline(in, line)) throw DataError("trajectory: fewer records than T");
        std::istringstream fields(line);
        std::vector<std::string> tokens;
        while (std::getline(fields, token, ',')) tokens.push_back(token);
        if (tokens.size() != d + 4) throw DataError("trajectory: record " + std::to_string(t + 1) + " has the wrong field count");
        if (parse_u64(tokens[0]) != t + 1) throw DataError("trajectory: round indices must be 1..T in order");
        const std::size_t action = parse_u64(tokens[1]);
        for (std::size_t j = 0; j < d; ++j) feature[j] = parse_real(tokens[2 + j]);
        traj.append(action, feature, parse_real(tokens[2 + d]), parse_real(tokens[3 + d]));
    }
    return traj;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputIOError("cannot open " + path + " for writing");
    write_trajectory(out, traj);
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return read_trajectory(in);
}

}  // namespace adlab
