#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "adlab/environment.hpp"
#include "adlab/linalg.hpp"
#include "adlab/rng.hpp"

namespace adlab {

enum class PolicyKind { Uniform, EpsilonGreedy, LinUCB, FixedArm };

struct PolicySpec {
    PolicyKind kind = PolicyKind::Uniform;
    double epsilon = 0.1;    // EpsilonGreedy
    double gamma = 1.0;      // LinUCB exploration bonus
    double ridge_reg = 1.0;  // offset of the internal Gram matrix
    std::size_t arm = 0;     // FixedArm

    static PolicySpec uniform() { return {}; }
    static PolicySpec epsilon_greedy(double eps, double ridge_reg = 1.0) {
        return {PolicyKind::EpsilonGreedy, eps, 1.0, ridge_reg, 0};
    }
    static PolicySpec linucb(double gamma, double ridge_reg = 1.0) { return {PolicyKind::LinUCB, 0.1, gamma, ridge_reg, 0}; }
    static PolicySpec fixed_arm(std::size_t arm) { return {PolicyKind::FixedArm, 0.1, 1.0, 1.0, arm}; }

    /// Config-format descriptor, e.g. "kind=linucb gamma=12 ridge_reg=1".
    std::string descriptor() const;
    std::uint64_t hash() const;
    std::string short_name() const;
};

struct Selection {
    std::size_t index = 0;
    double propensity = 1.0;
};

/// Sufficient statistics of a linear bandit learner:
///   gram = ridge_reg I + sum phi phi^T,   xty = sum phi y.
/// LinUCB and epsilon-greedy also carry gram^{-1}, kept current by
/// Sherman-Morrison rank-one downdates.
class PolicyState {
public:
    PolicyState(PolicySpec spec, std::size_t dim);

    const PolicySpec& spec() const noexcept { return spec_; }
    std::size_t dim() const noexcept { return gram_.dim(); }
    const SymMatrix& gram() const noexcept { return gram_; }
    const Vector& xty() const noexcept { return xty_; }
    std::size_t rounds_seen() const noexcept { return rounds_seen_; }
    bool caches_inverse() const noexcept { return has_inverse_; }
    const SymMatrix& gram_inverse() const noexcept { return gram_inv_; }

    /// gram^{-1} xty.
    Vector coefficient() const;
    /// max_ij |(gram^{-1} gram - I)_ij| for the cached inverse.
    double inverse_consistency_error() const;

    Selection select_action(const CandidateSet& candidates, CounterRng& rng);
    void update(std::span<const double> feature, double outcome);

private:
    std::size_t argmax_mean(const CandidateSet& candidates);

    PolicySpec spec_;
    SymMatrix gram_;
    SymMatrix gram_inv_;
    Vector xty_;
    std::size_t rounds_seen_ = 0;
    bool has_inverse_ = false;
    Vector beta_scratch_;
    Vector u_scratch_;
};

/// Relative tolerance under which two scores count as tied; ties go to the lowest index.
inline constexpr double kTieTolerance = 1e-12;

/// Throws EmptyCandidates on an empty candidate set.
Selection select_action(PolicyState& state, const CandidateSet& candidates, CounterRng& rng);
void update_state(PolicyState& state, std::span<const double> feature, double outcome);

/// c * d^2 * (sigma * sqrt(d + log log T) + 1); requires T >= 3.
double exploration_schedule(std::size_t horizon, std::size_t dim, double sigma, double c = 1.0);

}  // namespace adlab
