#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adlab/linalg.hpp"
#include "adlab/rng.hpp"

namespace adlab {

enum class FeatureKind {
    Intercept,        // phi == 1, d = 1, a single candidate per round
    TabularArms,      // phi(a) = e_a, d = K
    ContextArmBasis,  // phi(x, a) places x in block a, d = context_dim * K
    UnitSphereArms,   // K fresh unit vectors in R^d per round
};

struct FeatureSpec {
    FeatureKind kind = FeatureKind::UnitSphereArms;
    std::size_t dim = 1;          // UnitSphereArms only
    std::size_t arms = 2;         // K (candidates per round)
    std::size_t context_dim = 1;  // ContextArmBasis only
};

enum class ContextKind { None, UniformSphere, UniformFinite };

struct ContextLaw {
    ContextKind kind = ContextKind::None;
    std::size_t dim = 0;
    std::vector<Vector> support;  // UniformFinite only

    static ContextLaw none() { return {}; }
    static ContextLaw uniform_sphere(std::size_t dim) { return {ContextKind::UniformSphere, dim, {}}; }
    static ContextLaw uniform_finite(std::vector<Vector> support);

    std::string descriptor() const;
    /// Largest context norm (1 for the sphere, 0 without contexts).
    double norm_bound() const;
};

class FeatureMap {
public:
    FeatureKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t arms() const noexcept { return arms_; }
    std::size_t context_dim() const noexcept { return context_dim_; }
    /// Feature norm bound L; unset (0) until an environment ties it to a context law.
    double norm_bound() const noexcept { return norm_bound_; }
    std::size_t candidates_per_round() const noexcept { return kind_ == FeatureKind::Intercept ? 1 : arms_; }

    /// e_arm for TabularArms, [1] for Intercept.
    Vector arm_feature(std::size_t arm) const;
    /// x in block `arm` for ContextArmBasis.
    Vector context_feature(std::span<const double> context, std::size_t arm) const;

    std::string descriptor() const;

private:
    friend FeatureMap make_feature_map(const FeatureSpec& spec);
    friend struct Environment;
    FeatureKind kind_ = FeatureKind::Intercept;
    std::size_t dim_ = 1;
    std::size_t arms_ = 1;
    std::size_t context_dim_ = 0;
    double norm_bound_ = 1.0;
};

/// Throws InvalidSpec for zero dimensions or fewer than two arms on arm-based kinds.
FeatureMap make_feature_map(const FeatureSpec& spec);

/// Candidate feature vectors for one round, row-major (count x dim).
struct CandidateSet {
    std::size_t count = 0;
    std::size_t dim = 0;
    Vector features;
    Vector context;  // empty unless the feature map consumes a context

    std::span<const double> operator[](std::size_t i) const noexcept { return {features.data() + i * dim, dim}; }
    std::span<double> mutable_row(std::size_t i) noexcept { return {features.data() + i * dim, dim}; }
};

/// Draws the candidate set of one round into `out` (buffers are reused).
void sample_candidates(const FeatureMap& fm, const ContextLaw& law, CounterRng& rng, CandidateSet& out);
CandidateSet sample_candidates(const FeatureMap& fm, const ContextLaw& law, CounterRng& rng);

enum class NoiseKind { Gaussian, BoundedRademacherScaled };

/// Truth of a linear outcome model: E[Y | Z = z] = phi(z)^T beta0, Var = sigma^2.
struct Environment {
    FeatureMap features;
    Vector beta0;
    double sigma = 1.0;
    NoiseKind noise = NoiseKind::Gaussian;
    ContextLaw context_law;

    /// Validates dimensions and the feature/context pairing; sets the feature norm bound.
    static Environment make(FeatureMap features, Vector beta0, double sigma, NoiseKind noise = NoiseKind::Gaussian,
                            ContextLaw context_law = ContextLaw::none());

    double conditional_mean(std::span<const double> feature) const;
    std::string descriptor() const;
    std::uint64_t hash() const;
};

double sample_outcome(const Environment& env, std::span<const double> feature, CounterRng& rng);

/// 64-bit FNV-1a, used for descriptor hashes in trajectory headers.
std::uint64_t fnv1a64(std::string_view text) noexcept;

std::string format_vector(std::span<const double> v);

}  // namespace adlab
