#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "adlab/environment.hpp"
#include "adlab/linalg.hpp"
#include "adlab/policy.hpp"

namespace adlab {

struct Observation {
    std::size_t round = 0;  // 1-based
    std::size_t action_index = 0;
    std::span<const double> feature;
    double outcome = 0.0;
    double propensity = 1.0;
};

/// Ordered record of one environment + policy run. Features are stored
/// contiguously (T x d, row-major).
class Trajectory {
public:
    Trajectory() = default;
    explicit Trajectory(std::size_t dim) : dim_(dim) {}

    std::size_t horizon() const noexcept { return outcomes_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    void reserve(std::size_t horizon);
    void append(std::size_t action_index, std::span<const double> feature, double outcome, double propensity);

    Observation observation(std::size_t t) const;  // 0-based position
    std::span<const double> feature(std::size_t t) const noexcept { return {features_.data() + t * dim_, dim_}; }
    double outcome(std::size_t t) const noexcept { return outcomes_[t]; }
    std::size_t action(std::size_t t) const noexcept { return actions_[t]; }
    double propensity(std::size_t t) const noexcept { return propensities_[t]; }
    std::span<const double> outcomes() const noexcept { return outcomes_; }
    std::span<const double> features() const noexcept { return features_; }

    /// First `rounds` observations as a new trajectory (same metadata).
    Trajectory prefix(std::size_t rounds) const;
    /// Observations [begin, end) as a new trajectory (same metadata).
    Trajectory slice(std::size_t begin, std::size_t end) const;

    std::string env_descriptor;
    std::string policy_descriptor;
    std::uint64_t env_hash = 0;
    std::uint64_t policy_hash = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> actions_;
    Vector features_;
    Vector outcomes_;
    Vector propensities_;
};

/// Each round draws candidates, lets the policy select, draws the outcome and
/// feeds (phi, Y) back to the policy. Bit-exact for a fixed seed.
Trajectory generate_trajectory(const Environment& env, const PolicySpec& policy, std::size_t horizon,
                               std::uint64_t seed);

/// (1/T) sum phi phi^T
SymMatrix empirical_gram(const Trajectory& traj);
/// (1/T) sum phi Y
Vector empirical_cross_moment(const Trajectory& traj);

/// Monte Carlo estimate of the pooled second-moment matrix: the average of
/// empirical_gram over n_mc trajectories with seeds derive_seed(seed, 0, i).
SymMatrix pooled_design_oracle(const Environment& env, const PolicySpec& policy, std::size_t horizon,
                               std::size_t n_mc, std::uint64_t seed, unsigned workers = 1);

/// Text format:
///   adlab-trajectory v1 T=<T> d=<d> env_hash=<hex> policy_hash=<hex> seed=<u64>
///   t,action_index,feature_0,...,feature_{d-1},outcome,propensity   (one line per round)
/// Reals use 17 significant digits, so the round trip is lossless.
void write_trajectory(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory(std::istream& in);
void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

}  // namespace adlab
