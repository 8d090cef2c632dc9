#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

#include "adlab/errors.hpp"
#include "adlab/rng.hpp"
#include "adlab/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adlab;

TEST_SUITE("rng") {

TEST_CASE("derived seeds do not collide over 10^6 draws") {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2'000'000);
    std::size_t n = 0;
    for (std::uint64_t cell = 0; cell < 10; ++cell)
        for (std::uint64_t rep = 0; rep < 100'000; ++rep, ++n) seen.insert(derive_seed(20240601, cell, rep));
    CHECK(seen.size() == n);
    CHECK(n == 1'000'000);
}

TEST_CASE("streams are reproducible from the key") {
    CounterRng a(99), b(99);
    for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());
    CounterRng c(100);
    CHECK(CounterRng(99).next_u64() != c.next_u64());
}

TEST_CASE("uniform and normal moments") {
    CounterRng rng(5);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    std::vector<double> counts(7, 0.0);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK_FALSE((u < 0.0 || u >= 1.0));
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
        counts[rng.below(7)] += 1;
    }
    CHECK(std::fabs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
    CHECK(std::fabs(sn / n) < 4 / std::sqrt(n));
    CHECK(std::fabs(sn2 / n - 1) < 4 * std::sqrt(2.0 / n));
    for (double c : counts) CHECK(std::fabs(c / n - 1.0 / 7) < 4 * std::sqrt((1.0 / 7) * (6.0 / 7) / n));
}

}  // TEST_SUITE

TEST_SUITE("stats") {

TEST_CASE("normal cdf and quantile") {
    // reference values to 16 digits
    CHECK(std::fabs(stats::normal_cdf(0.0) - 0.5) < 1e-15);
    CHECK(std::fabs(stats::normal_cdf(1.0) - 0.8413447460685429) < 1e-13);
    CHECK(std::fabs(stats::normal_cdf(-3.0) - 0.0013498980316300946) < 1e-15);
    CHECK(std::fabs(stats::normal_quantile(0.975) - 1.959963984540054) < 1e-12);
    for (double p : {1e-10, 0.001, 0.2, 0.5, 0.77, 0.999}) CHECK(std::fabs(stats::normal_cdf(stats::normal_quantile(p)) - p) / p < 1e-11);
    // numeric integration of the density
    const double integral = oracle::simpson([](double z) { return stats::normal_pdf(z); }, -1.3, 0.4);
    CHECK(std::fabs(integral - (stats::normal_cdf(0.4) - stats::normal_cdf(-1.3))) < 1e-12);
}

TEST_CASE("truncated second moment against quadrature") {
    for (double c : {0.0, 0.3, 1.0, 2.0, 4.5}) {
        CAPTURE(c);
        CHECK(std::fabs(stats::truncated_second_moment(c) - oracle::truncated_moment(c)) < 1e-10);
    }
    CHECK(stats::truncated_second_moment(0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(stats::truncated_second_moment(1.0) == doctest::Approx(0.8012).epsilon(1e-4));
}

TEST_CASE("kolmogorov survival series agree at the switch point") {
    // both branches sum the same function; compare just around x = 1.18
    const double lo = stats::kolmogorov_survival(1.18 - 1e-9), hi = stats::kolmogorov_survival(1.18 + 1e-9);
    CHECK(std::fabs(lo - hi) < 1e-8);
    CHECK(stats::kolmogorov_survival(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(stats::kolmogorov_survival(0.0) == 1.0);
    CHECK(stats::kolmogorov_survival(0.2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ks_normality examples") {
    const std::size_t n = 1000;
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = stats::normal_quantile((static_cast<double>(i) + 0.5) / n);
    const auto r1 = stats::ks_normality(q);
    CHECK(r1.stat <= 0.5 / n * (1 + 1e-9));
    CHECK(r1.pvalue > 0.999999);

    std::vector<double> zeros(50, 0.0);
    const auto r2 = stats::ks_normality(zeros);
    CHECK(r2.stat == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r2.pvalue < 1e-10);

    CounterRng rng(12);
    std::vector<double> u(2000);
    for (double& x : u) x = rng.uniform();
    CHECK(stats::ks_normality(u).pvalue < 1e-6);

    CHECK_THROWS_AS(stats::ks_normality(std::vector<double>(7, 0.1)), TooFewSamples);
}

TEST_CASE("ks_normality on genuine normals is calibrated") {
    CounterRng rng(13);
    int rejects = 0;
    const int trials = 400;
    for (int k = 0; k < trials; ++k) {
        std::vector<double> z(200);
        for (double& x : z) x = rng.normal();
        if (stats::ks_normality(z).pvalue < 0.05) ++rejects;
    }
    // binomial(400, 0.05) has sd ~4.4; the asymptotic p-value is slightly conservative
    CHECK(rejects <= 20 + 15);
}

TEST_CASE("mean, variance, median") {
    const std::vector<double> v{3, 1, 2, NAN, 10};
    CHECK(stats::median(v) == 2.5);
    CHECK(std::isnan(stats::median(std::vector<double>{NAN})));
    const std::vector<double> w{1, 2, 3, 4};
    CHECK(stats::mean(w) == 2.5);
    CHECK(stats::variance(w) == doctest::Approx(5.0 / 3.0));
}

}  // TEST_SUITE
