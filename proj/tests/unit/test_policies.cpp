#include <cmath>

#include "adlab/errors.hpp"
#include "adlab/policy.hpp"
#include "adlab/trajectory.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adlab;

namespace {

CandidateSet make_candidates(const std::vector<Vector>& rows) {
    CandidateSet c;
    c.count = rows.size();
    c.dim = rows.front().size();
    for (const auto& r : rows) c.features.insert(c.features.end(), r.begin(), r.end());
    return c;
}

CandidateSet sphere_candidates(std::size_t d, std::size_t k, CounterRng& rng) {
    return sample_candidates(make_feature_map({FeatureKind::UnitSphereArms, d, k, 1}), ContextLaw::none(), rng);
}

}  // namespace

TEST_SUITE("policies") {

TEST_CASE("uniform propensity") {
    PolicyState st(PolicySpec::uniform(), 4);
    CounterRng rng(1);
    std::vector<int> hits(4, 0);
    for (int i = 0; i < 4000; ++i) {
        const Selection s = select_action(st, sphere_candidates(4, 4, rng), rng);
        CHECK(s.propensity == 0.25);
        ++hits[s.index];
    }
    for (int h : hits) CHECK(std::abs(h - 1000) < 4 * std::sqrt(4000 * 0.25 * 0.75));
}

TEST_CASE("LinUCB cold start ties go to index 0") {
    const double gamma = 2.5, ridge = 4.0;
    PolicyState st(PolicySpec::linucb(gamma, ridge), 5);
    CounterRng rng(2);
    for (int i = 0; i < 20; ++i) {
        const CandidateSet c = sphere_candidates(5, 7, rng);
        const Selection s = select_action(st, c, rng);
        CHECK(s.index == 0);
        CHECK(s.propensity == 1.0);
        // every score equals gamma / sqrt(ridge_reg)
        for (std::size_t k = 0; k < c.count; ++k) {
            const Vector cv(c[k].begin(), c[k].end());
            const double width = std::sqrt(oracle::naive_quadratic(st.gram_inverse(), cv));
            CHECK(gamma * width == doctest::Approx(gamma / std::sqrt(ridge)).epsilon(1e-12));
        }
    }
}

TEST_CASE("LinUCB hand-evaluated scores") {
    PolicyState st(PolicySpec::linucb(1.0, 1.0), 2);
    const double r10 = std::sqrt(10.0);
    update_state(st, Vector{r10, 0}, r10);  // gram = diag(11, 1), xty = (10, 0)
    update_state(st, Vector{0, 1}, 0.0);    // gram = diag(11, 2)
    CHECK((st.gram() - SymMatrix::diagonal(Vector{11, 2})).frobenius_norm() < 1e-14);
    CHECK(std::fabs(st.xty()[0] - 10.0) < 1e-14);

    const double s1 = 10.0 / 11.0 + 1.0 / std::sqrt(11.0), s2 = 0.0 + 1.0 / std::sqrt(2.0);
    CHECK(s1 == doctest::Approx(1.2107).epsilon(1e-4));
    CHECK(s2 == doctest::Approx(0.7071).epsilon(1e-4));
    CounterRng rng(3);
    CHECK(select_action(st, make_candidates({{1, 0}, {0, 1}}), rng).index == 0);
    CHECK(select_action(st, make_candidates({{0, 1}, {1, 0}}), rng).index == 1);
}

TEST_CASE("epsilon-greedy propensities") {
    const double eps = 0.3;
    PolicyState st(PolicySpec::epsilon_greedy(eps), 2);
    update_state(st, Vector{1, 0}, 5.0);  // arm e1 looks best
    CounterRng rng(4);
    const CandidateSet c = make_candidates({{0, 1}, {1, 0}, {0, -1}});
    const double greedy_p = eps / 3 + (1 - eps), other_p = eps / 3;
    CHECK(greedy_p + 2 * other_p == doctest::Approx(1.0));
    int greedy_hits = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Selection s = select_action(st, c, rng);
        if (s.index == 1) {
            ++greedy_hits;
            CHECK(s.propensity == doctest::Approx(greedy_p).epsilon(1e-15));
        } else {
            CHECK(s.propensity == doctest::Approx(other_p).epsilon(1e-15));
        }
        CHECK(s.propensity > 0.0);
        CHECK(s.propensity <= 1.0);
    }
    CHECK(std::fabs(greedy_hits / double(n) - greedy_p) < 4 * std::sqrt(greedy_p * (1 - greedy_p) / n));
}

TEST_CASE("empty candidates are rejected") {
    PolicyState st(PolicySpec::linucb(1.0), 3);
    CounterRng rng(5);
    CandidateSet empty;
    empty.dim = 3;
    CHECK_THROWS_AS(select_action(st, empty, rng), EmptyCandidates);
}

TEST_CASE("update_state examples") {
    const double ridge = 2.0;
    PolicyState st(PolicySpec::linucb(1.0, ridge), 3);
    update_state(st, Vector{1, 0, 0}, 2.0);
    SymMatrix expect = SymMatrix::identity(3, ridge);
    expect.rank_one_update(Vector{1, 0, 0});
    CHECK(st.gram() == expect);
    CHECK(st.xty() == Vector{2, 0, 0});
    CHECK(st.rounds_seen() == 1);

    // order of updates does not matter for the totals
    PolicyState a(PolicySpec::uniform(), 2), b(PolicySpec::uniform(), 2);
    update_state(a, Vector{0.5, 0.25}, 1.0);
    update_state(a, Vector{-0.75, 1.0}, -2.0);
    update_state(b, Vector{-0.75, 1.0}, -2.0);
    update_state(b, Vector{0.5, 0.25}, 1.0);
    CHECK(a.gram() == b.gram());
    CHECK(a.xty() == b.xty());
}

TEST_CASE("cached inverse stays consistent over 1000 updates") {
    PolicyState st(PolicySpec::linucb(1.0, 1.0), 6);
    CounterRng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const Vector phi = oracle::random_vector(6, rng);
        update_state(st, phi, rng.normal());
    }
    REQUIRE(st.caches_inverse());
    CHECK(st.inverse_consistency_error() < 1e-7);
    const SymMatrix g_minus = st.gram() - SymMatrix::identity(6);
    CHECK(sym_eigendecomposition(g_minus).values.back() >= -1e-9);
    CHECK(Cholesky::is_positive_definite(st.gram()));
    // coefficient agrees with an independent solve
    const Vector ref = oracle::gauss_solve(st.gram(), st.xty());
    const Vector beta = st.coefficient();
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(beta[i] - ref[i]) < 1e-8);
}

TEST_CASE("selection is deterministic") {
    PolicyState a(PolicySpec::epsilon_greedy(0.5), 3), b(PolicySpec::epsilon_greedy(0.5), 3);
    CounterRng ra(7), rb(7), rc(8);
    for (int i = 0; i < 200; ++i) {
        const CandidateSet c = sphere_candidates(3, 5, rc);
        const Selection sa = select_action(a, c, ra), sb = select_action(b, c, rb);
        CHECK(sa.index == sb.index);
        CHECK(sa.propensity == sb.propensity);
        const double y = rc.normal();
        update_state(a, c[sa.index], y);
        update_state(b, c[sb.index], y);
    }
}

TEST_CASE("exploration_schedule examples") {
    CHECK(exploration_schedule(10, 1, 0.0) == 1.0);
    CHECK(exploration_schedule(12345, 1, 0.0, 3.0) == 3.0);
    // log log T = 1 at T = e^e ~ 15.15; T is an integer so bracket it
    const double target = 4 * (std::sqrt(3.0) + 1);
    CHECK(target == doctest::Approx(10.928).epsilon(1e-4));
    CHECK(exploration_schedule(15, 2, 1.0) < target);
    CHECK(exploration_schedule(16, 2, 1.0) > target);
    CHECK(exploration_schedule(15, 2, 1.0) == doctest::Approx(4 * (std::sqrt(2 + std::log(std::log(15.0))) + 1)));
    double prev = 0;
    for (std::size_t d = 1; d < 10; ++d) {
        const double g = exploration_schedule(1000, d, 0.5);
        CHECK(g >= prev);
        prev = g;
    }
    prev = 0;
    for (double s : {0.0, 0.1, 1.0, 3.0}) {
        const double g = exploration_schedule(1000, 3, s);
        CHECK(g >= prev);
        prev = g;
    }
    prev = 0;
    for (std::size_t T : {3u, 10u, 100u, 10000u, 1000000u}) {
        const double g = exploration_schedule(T, 3, 1.0);
        CHECK(g >= prev);
        prev = g;
    }
}

TEST_CASE("LinUCB has lower regret than uniform on a two-arm problem") {
    const Environment env = Environment::make(make_feature_map({FeatureKind::TabularArms, 2, 2, 1}), Vector{1.0, 0.5}, 0.25);
    const std::size_t T = 2000, reps = 200;
    auto mean_regret = [&](const PolicySpec& pol) {
        double total = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const Trajectory tr = generate_trajectory(env, pol, T, derive_seed(3, 0, r));
            for (std::size_t t = 0; t < T; ++t) total += 1.0 - env.conditional_mean(tr.feature(t));
        }
        return total / static_cast<double>(reps * T);
    };
    const double uni = mean_regret(PolicySpec::uniform());
    const double ucb = mean_regret(PolicySpec::linucb(1.0));
    CHECK(ucb <= 0.7 * uni);
}

}  // TEST_SUITE
