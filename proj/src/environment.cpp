#include "adlab/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "adlab/errors.hpp"
#include "adlab/simd/kernels.hpp"

namespace adlab {

std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_vector(std::span<const double> v) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        if (i) out += ',';
        out += buf;
    }
    return out;
}

ContextLaw ContextLaw::uniform_finite(std::vector<Vector> support) {
    if (support.empty()) throw InvalidSpec("ContextLaw: finite support must be nonempty");
    const std::size_t dim = support.front().size();
    for (const auto& x : support) {
        if (x.size() != dim || dim == 0) throw InvalidSpec("ContextLaw: support vectors must share a positive dimension");
    }
    return {ContextKind::UniformFinite, dim, std::move(support)};
}

std::string ContextLaw::descriptor() const {
    switch (kind) {
        case ContextKind::None: return "none";
        case ContextKind::UniformSphere: return "uniform_sphere(" + std::to_string(dim) + ")";
        case ContextKind::UniformFinite: {
            std::string s = "uniform_finite(";
            for (std::size_t i = 0; i < support.size(); ++i) {
                if (i) s += ';';
                s += format_vector(support[i]);
            }
            return s + ")";
        }
    }
    return "unknown";
}

double ContextLaw::norm_bound() const {
    switch (kind) {
        case ContextKind::None: return 0.0;
        case ContextKind::UniformSphere: return 1.0;
        case ContextKind::UniformFinite: {
            double worst = 0.0;
            for (const auto& x : support) worst = std::max(worst, norm2(x));
            return worst;
        }
    }
    return 0.0;
}

FeatureMap make_feature_map(const FeatureSpec& spec) {
    FeatureMap fm;
    fm.kind_ = spec.kind;
    switch (spec.kind) {
        case FeatureKind::Intercept:
            fm.dim_ = 1;
            fm.arms_ = 1;
            fm.norm_bound_ = 1.0;
            break;
        case FeatureKind::TabularArms:
            if (spec.arms < 2) throw InvalidSpec("TabularArms needs at least two arms");
            fm.dim_ = spec.arms;
            fm.arms_ = spec.arms;
            fm.norm_bound_ = 1.0;
            break;
        case FeatureKind::ContextArmBasis:
            if (spec.arms < 2) throw InvalidSpec("ContextArmBasis needs at least two arms");
            if (spec.context_dim == 0) throw InvalidSpec("ContextArmBasis needs a positive context dimension");
            fm.context_dim_ = spec.context_dim;
            fm.arms_ = spec.arms;
            fm.dim_ = spec.context_dim * spec.arms;
            fm.norm_bound_ = 0.0;
            break;
        case FeatureKind::UnitSphereArms:
            if (spec.arms < 2) throw InvalidSpec("UnitSphereArms needs at least two arms per round");
            if (spec.dim == 0) throw InvalidSpec("UnitSphereArms needs a positive dimension");
            fm.dim_ = spec.dim;
            fm.arms_ = spec.arms;
            fm.norm_bound_ = 1.0;
            break;
    }
    return fm;
}

Vector FeatureMap::arm_feature(std::size_t arm) const {
    if (kind_ == FeatureKind::Intercept) return Vector{1.0};
    if (kind_ != FeatureKind::TabularArms) throw InvalidArgument("arm_feature: only defined for TabularArms and Intercept");
    if (arm >= arms_) throw InvalidArgument("arm_feature: arm index out of range");
    Vector e(dim_, 0.0);
    e[arm] = 1.0;
    return e;
}

Vector FeatureMap::context_feature(std::span<const double> context, std::size_t arm) const {
    if (kind_ != FeatureKind::ContextArmBasis) throw InvalidArgument("context_feature: only defined for ContextArmBasis");
    if (context.size() != context_dim_ || arm >= arms_) throw InvalidArgument("context_feature: bad context or arm");
    Vector phi(dim_, 0.0);
    std::copy(context.begin(), context.end(), phi.begin() + static_cast<std::ptrdiff_t>(arm * context_dim_));
    return phi;
}

std::string FeatureMap::descriptor() const {
    switch (kind_) {
        case FeatureKind::Intercept: return "intercept";
        case FeatureKind::TabularArms: return "tabular(" + std::to_string(arms_) + ")";
        case FeatureKind::ContextArmBasis:
            return "context_arm(" + std::to_string(context_dim_) + "," + std::to_string(arms_) + ")";
        case FeatureKind::UnitSphereArms:
            return "unit_sphere(" + std::to_string(dim_) + "," + std::to_string(arms_) + ")";
    }
    return "unknown";
}

namespace {

void draw_unit_vector(CounterRng& rng, std::span<double> out) {
    for (;;) {
        for (double& x : out) x = rng.normal();
        const double n = norm2(out);
        if (n > 0.0) {
            for (double& x : out) x /= n;
            return;
        }
    }
}

}  // namespace

void sample_candidates(const FeatureMap& fm, const ContextLaw& law, CounterRng& rng, CandidateSet& out) {
    const std::size_t count = fm.candidates_per_round();
    const std::size_t d = fm.dim();
    out.count = count;
    out.dim = d;
    out.features.assign(count * d, 0.0);
    switch (fm.kind()) {
        case FeatureKind::Intercept:
            out.features[0] = 1.0;
            out.context.clear();
            break;
        case FeatureKind::TabularArms:
            for (std::size_t a = 0; a < count; ++a) out.features[a * d + a] = 1.0;
            out.context.clear();
            break;
        case FeatureKind::UnitSphereArms:
            for (std::size_t a = 0; a < count; ++a) draw_unit_vector(rng, out.mutable_row(a));
            out.context.clear();
            break;
        case FeatureKind::ContextArmBasis: {
            const std::size_t cd = fm.context_dim();
            out.context.assign(cd, 0.0);
            if (law.kind == ContextKind::UniformSphere) {
                draw_unit_vector(rng, out.context);
            } else if (law.kind == ContextKind::UniformFinite) {
                const auto& x = law.support[rng.below(law.support.size())];
                std::copy(x.begin(), x.end(), out.context.begin());
            } else {
                throw InvalidSpec("ContextArmBasis requires a context law");
            }
            for (std::size_t a = 0; a < count; ++a)
                std::copy(out.context.begin(), out.context.end(), out.features.begin() + static_cast<std::ptrdiff_t>(a * d + a * cd));
            break;
        }
    }
}

CandidateSet sample_candidates(const FeatureMap& fm, const ContextLaw& law, CounterRng& rng) {
    CandidateSet out;
    sample_candidates(fm, law, rng, out);
    return out;
}

Environment Environment::make(FeatureMap features, Vector beta0, double sigma, NoiseKind noise, ContextLaw context_law) {
    if (beta0.size() != features.dim()) throw InvalidSpec("Environment: beta0 dimension does not match the feature map");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidSpec("Environment: sigma must be finite and nonnegative");
    for (double b : beta0)
        if (!std::isfinite(b)) throw InvalidSpec("Environment: beta0 must be finite");
    if (features.kind() == FeatureKind::ContextArmBasis) {
        if (context_law.kind == ContextKind::None || context_law.dim != features.context_dim()) {
            throw InvalidSpec("Environment: ContextArmBasis needs a context law of matching dimension");
        }
        features.norm_bound_ = context_law.norm_bound();
    } else if (context_law.kind != ContextKind::None) {
        throw InvalidSpec("Environment: only ContextArmBasis consumes contexts");
    }
    Environment env;
    env.features = std::move(features);
    env.beta0 = std::move(beta0);
    env.sigma = sigma;
    env.noise = noise;
    env.context_law = std::move(context_law);
    return env;
}

double Environment::conditional_mean(std::span<const double> feature) const { return dot(feature, beta0); }

std::string Environment::descriptor() const {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", sigma);
    return "features=" + features.descriptor() + " context=" + context_law.descriptor() + " beta0=" +
           format_vector(beta0) + " sigma=" + buf +
           " noise=" + (noise == NoiseKind::Gaussian ? "gaussian" : "rademacher");
}

std::uint64_t Environment::hash() const { return fnv1a64(descriptor()); }

double sample_outcome(const Environment& env, std::span<const double> feature, CounterRng& rng) {
    if (feature.size() != env.beta0.size()) throw InvalidArgument("sample_outcome: dimension mismatch");
    const double mean = env.conditional_mean(feature);
    const double eps = env.noise == NoiseKind::Gaussian ? rng.normal() : rng.rademacher();
    return mean + env.sigma * eps;
}

}  // namespace adlab
