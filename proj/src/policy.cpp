#include "adlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "adlab/errors.hpp"
#include "adlab/simd/kernels.hpp"

namespace adlab {

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

bool beats(double score, double best) { return score > best + kTieTolerance * std::max(1.0, std::abs(best)); }

}  // namespace

std::string PolicySpec::descriptor() const {
    switch (kind) {
        case PolicyKind::Uniform: return "kind=uniform ridge_reg=" + fmt(ridge_reg);
        case PolicyKind::EpsilonGreedy: return "kind=epsilon_greedy epsilon=" + fmt(epsilon) + " ridge_reg=" + fmt(ridge_reg);
        case PolicyKind::LinUCB: return "kind=linucb gamma=" + fmt(gamma) + " ridge_reg=" + fmt(ridge_reg);
        case PolicyKind::FixedArm: return "kind=fixed arm=" + std::to_string(arm);
    }
    return "kind=unknown";
}

std::uint64_t PolicySpec::hash() const { return fnv1a64(descriptor()); }

std::string PolicySpec::short_name() const {
    switch (kind) {
        case PolicyKind::Uniform: return "uniform";
        case PolicyKind::EpsilonGreedy: return "epsilon_greedy";
        case PolicyKind::LinUCB: return "linucb";
        case PolicyKind::FixedArm: return "fixed";
    }
    return "unknown";
}

PolicyState::PolicyState(PolicySpec spec, std::size_t dim)
    : spec_(spec), gram_(SymMatrix::identity(dim, spec.ridge_reg)), xty_(dim, 0.0), beta_scratch_(dim), u_scratch_(dim) {
    if (dim == 0) throw InvalidSpec("PolicyState: dimension must be positive");
    if (!(spec.ridge_reg > 0.0)) throw InvalidSpec("PolicyState: ridge_reg must be positive");
    if (spec.kind == PolicyKind::EpsilonGreedy && !(spec.epsilon >= 0.0 && spec.epsilon <= 1.0)) {
        throw InvalidSpec("PolicyState: epsilon must lie in [0, 1]");
    }
    if (spec.kind == PolicyKind::LinUCB && !(spec.gamma >= 0.0)) throw InvalidSpec("PolicyState: gamma must be nonnegative");
    has_inverse_ = spec.kind == PolicyKind::LinUCB || spec.kind == PolicyKind::EpsilonGreedy;
    if (has_inverse_) gram_inv_ = SymMatrix::identity(dim, 1.0 / spec.ridge_reg);
}

Vector PolicyState::coefficient() const {
    if (has_inverse_) return gram_inv_.multiply(xty_);
    return ridge_solve(gram_, xty_, 0.0);
}

double PolicyState::inverse_consistency_error() const {
    if (!has_inverse_) return 0.0;
    const std::size_t n = dim();
    double worst = 0.0;
    Vector col(n), prod(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = gram_(i, j);
        gram_inv_.multiply_into(col, prod);
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(prod[i] - (i == j ? 1.0 : 0.0)));
    }
    return worst;
}

std::size_t PolicyState::argmax_mean(const CandidateSet& candidates) {
    gram_inv_.multiply_into(xty_, beta_scratch_);
    std::size_t best_index = 0;
    double best = -INFINITY;
    for (std::size_t k = 0; k < candidates.count; ++k) {
        const double mean = simd::dot(candidates[k], beta_scratch_);
        if (k == 0 || beats(mean, best)) {
            best = mean;
            best_index = k;
        }
    }
    return best_index;
}

Selection PolicyState::select_action(const CandidateSet& candidates, CounterRng& rng) {
    if (candidates.count == 0) throw EmptyCandidates("select_action: no candidates");
    if (candidates.dim != dim()) throw InvalidArgument("select_action: candidate dimension mismatch");
    const std::size_t count = candidates.count;
    const double inv_count = 1.0 / static_cast<double>(count);

    switch (spec_.kind) {
        case PolicyKind::Uniform: return {static_cast<std::size_t>(rng.below(count)), inv_count};
        case PolicyKind::FixedArm:
            if (spec_.arm >= count) throw InvalidSpec("FixedArm policy: arm index out of range");
            return {spec_.arm, 1.0};
        case PolicyKind::EpsilonGreedy: {
            const double u = rng.uniform();
            const std::size_t random_index = static_cast<std::size_t>(rng.below(count));
            const std::size_t greedy = argmax_mean(candidates);
            const std::size_t chosen = u < spec_.epsilon ? random_index : greedy;
            const double propensity = spec_.epsilon * inv_count + (chosen == greedy ? 1.0 - spec_.epsilon : 0.0);
            return {chosen, propensity};
        }
        case PolicyKind::LinUCB: {
            gram_inv_.multiply_into(xty_, beta_scratch_);
            std::size_t best_index = 0;
            double best = -INFINITY;
            for (std::size_t k = 0; k < count; ++k) {
                const auto phi = candidates[k];
                gram_inv_.multiply_into(phi, u_scratch_);
                const double width2 = simd::dot(phi, u_scratch_);
                const double score = simd::dot(phi, beta_scratch_) + spec_.gamma * std::sqrt(std::max(width2, 0.0));
                if (k == 0 || beats(score, best)) {
                    best = score;
                    best_index = k;
                }
            }
            return {best_index, 1.0};
        }
    }
    throw InvalidSpec("select_action: unknown policy kind");
}

void PolicyState::update(std::span<const double> feature, double outcome) {
    if (feature.size() != dim()) throw InvalidArgument("update_state: dimension mismatch");
    gram_.rank_one_update(feature, 1.0);
    simd::axpy(outcome, feature, xty_);
    ++rounds_seen_;
    if (has_inverse_) {
        // (G + x x^T)^{-1} = G^{-1} - (G^{-1} x)(G^{-1} x)^T / (1 + x^T G^{-1} x)
        gram_inv_.multiply_into(feature, u_scratch_);
        const double denom = 1.0 + simd::dot(feature, u_scratch_);
        gram_inv_.rank_one_update(u_scratch_, -1.0 / denom);
#ifndef NDEBUG
        if (rounds_seen_ % 1000 == 0 && inverse_consistency_error() > 1e-6) {
            throw NonConvergence("PolicyState: cached Gram inverse drifted from the Gram matrix");
        }
#endif
    }
}

Selection select_action(PolicyState& state, const CandidateSet& candidates, CounterRng& rng) {
    return state.select_action(candidates, rng);
}

void update_state(PolicyState& state, std::span<const double> feature, double outcome) { state.update(feature, outcome); }

double exploration_schedule(std::size_t horizon, std::size_t dim, double sigma, double c) {
    if (horizon < 3) throw InvalidArgument("exploration_schedule: horizon must be at least 3");
    const double d = static_cast<double>(dim);
    const double loglog = std::log(std::log(static_cast<double>(horizon)));
    return c * d * d * (sigma * std::sqrt(d + loglog) + 1.0);
}

}  // namespace adlab
