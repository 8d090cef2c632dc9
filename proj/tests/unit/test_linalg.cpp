#include <cmath>

#include "adlab/errors.hpp"
#include "adlab/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adlab;

namespace {

double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

double residual(const SymMatrix& s, const Vector& x, const Vector& b, double lambda) {
    Vector r = oracle::naive_mult(s, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += lambda * x[i] - b[i];
    return norm2(r);
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("SymMatrix storage stays symmetric") {
    CounterRng rng(1);
    SymMatrix s(6);
    for (int k = 0; k < 20; ++k) s.rank_one_update(oracle::random_vector(6, rng), 0.37);
    s.add_identity(0.1);
    s.scale(3.0);
    CHECK(s.max_abs_asymmetry() == 0.0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(s(i, j) == s(j, i));
    Vector bad{1, 2, 3, 4};
    CHECK_THROWS_AS(SymMatrix::from_rows(2, bad), InvalidArgument);
}

TEST_CASE("empirical second moments are PSD within tolerance") {
    CounterRng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const SymMatrix s = oracle::random_psd(7, 3, rng);
        const auto eig = sym_eigendecomposition(s);
        CHECK(eig.values.back() >= -eigen_tolerance(s));
    }
}

TEST_CASE("ridge_solve examples") {
    const Vector x1 = ridge_solve(SymMatrix::identity(2), Vector{2, 4}, 1.0);
    CHECK(x1[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(x1[1] == doctest::Approx(2.0).epsilon(1e-15));

    const Vector x2 = ridge_solve(SymMatrix::diagonal(Vector{3, 0}), Vector{1, 1}, 1.0);
    CHECK(std::fabs(x2[0] - 0.25) < 1e-15);
    CHECK(std::fabs(x2[1] - 1.0) < 1e-15);

    CounterRng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const SymMatrix s = oracle::random_psd(5, 8, rng);
        const Vector b = oracle::random_vector(5, rng);
        const Vector x = ridge_solve(s, b, 0.1);
        CHECK(max_abs_diff(x, oracle::gauss_solve(s, b, 0.1)) < 1e-8);
        CHECK(residual(s, x, b, 0.1) <= 1e-8 * (1 + norm2(b)));
    }
}

TEST_CASE("ridge_solve at lambda = 0") {
    CounterRng rng(4);
    const SymMatrix s = oracle::random_psd(4, 10, rng);
    const Vector b = oracle::random_vector(4, rng);
    CHECK(max_abs_diff(ridge_solve(s, b, 0.0), oracle::gauss_solve(s, b)) < 1e-8);
    CHECK_THROWS_AS(ridge_solve(SymMatrix::diagonal(Vector{1, 0}), Vector{1, 1}, 0.0), SingularSystem);
    const SymMatrix rank2 = oracle::random_psd(4, 2, rng);
    CHECK_THROWS_AS(ridge_solve(rank2, b, 0.0), SingularSystem);
}

TEST_CASE("pseudo_inverse_apply examples") {
    const Vector x1 = pseudo_inverse_apply(SymMatrix::diagonal(Vector{2, 0}), Vector{1, 1});
    CHECK(std::fabs(x1[0] - 0.5) < 1e-15);
    CHECK(x1[1] == 0.0);

    const Vector x2 = pseudo_inverse_apply(SymMatrix::identity(3), Vector{1, 2, 3});
    CHECK(max_abs_diff(x2, Vector{1, 2, 3}) < 1e-14);

    const Vector zero = pseudo_inverse_apply(SymMatrix(3), Vector{1, 2, 3});
    CHECK(max_abs_diff(zero, Vector{0, 0, 0}) == 0.0);

    // Penrose identity on random rank-2 matrices
    CounterRng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const SymMatrix s = oracle::random_psd(4, 2, rng);
        const Vector b = oracle::naive_mult(s, oracle::random_vector(4, rng));
        const Vector x = pseudo_inverse_apply(s, b);
        CHECK(max_abs_diff(oracle::naive_mult(s, x), b) < 1e-8);
    }
}

TEST_CASE("ridge_solve agrees with pseudo-inverse of S + lambda I") {
    CounterRng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 2 + rep % 6;
        const SymMatrix s = oracle::random_psd(d, 1 + rep % 4, rng);
        const Vector b = oracle::random_vector(d, rng);
        const double lambda = 0.01 + 0.2 * rep;
        SymMatrix shifted = s;
        shifted.add_identity(lambda);
        CHECK(max_abs_diff(ridge_solve(s, b, lambda), pseudo_inverse_apply(shifted, b, 0.0)) < 1e-8);
    }
}

TEST_CASE("effective_dimension examples and monotonicity") {
    CHECK(effective_dimension(SymMatrix::identity(5), 1.0) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(effective_dimension(SymMatrix::diagonal(Vector{1, 0}), 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(effective_dimension(SymMatrix(4), 0.3) == 0.0);

    CounterRng rng(7);
    const double lambdas[] = {0.01, 0.1, 0.5, 2.0, 10.0};
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 2 + rep % 7;
        const SymMatrix s = oracle::random_psd(d, 1 + rep % 9, rng);
        double prev = static_cast<double>(d) + 1.0;
        for (double l : lambdas) {
            const double e = effective_dimension(s, l);
            CHECK(e >= 0.0);
            CHECK(e <= static_cast<double>(d));
            CHECK(e < prev);
            prev = e;
        }
    }
}

TEST_CASE("quadratic_form examples") {
    CHECK(quadratic_form(SymMatrix::identity(2), Vector{3, 4}) == 25.0);
    CHECK(quadratic_form(SymMatrix::diagonal(Vector{2, 1}), Vector{1, 1}) == 3.0);
    CounterRng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        const SymMatrix s = oracle::random_psd(9, 4, rng);
        const Vector v = oracle::random_vector(9, rng);
        const double ref = oracle::naive_quadratic(s, v);
        CHECK(std::fabs(quadratic_form(s, v) - ref) <= 1e-10 * (1 + std::fabs(ref)));
    }
}

TEST_CASE("sym_eigendecomposition examples") {
    auto e1 = sym_eigendecomposition(SymMatrix::diagonal(Vector{1, 3}));
    CHECK(e1.values[0] == doctest::Approx(3.0));
    CHECK(e1.values[1] == doctest::Approx(1.0));
    CHECK(std::fabs(std::fabs(e1.vectors[0][1]) - 1.0) < 1e-12);
    CHECK(std::fabs(std::fabs(e1.vectors[1][0]) - 1.0) < 1e-12);

    auto e2 = sym_eigendecomposition(SymMatrix::from_rows({{2, 1}, {1, 2}}));
    CHECK(e2.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e2.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(std::fabs(e2.vectors[0][0]) - std::sqrt(0.5)) < 1e-12);
    CHECK(std::fabs(e2.vectors[0][0] - e2.vectors[0][1]) < 1e-12);

    auto e3 = sym_eigendecomposition(SymMatrix::identity(6));
    for (double v : e3.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eigendecomposition invariants on random matrices") {
    CounterRng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 2 + rep % 10;
        SymMatrix s = oracle::random_psd(d, d + 2, rng);
        s.rank_one_update(oracle::random_vector(d, rng), -0.3);  // indefinite too
        const auto eig = sym_eigendecomposition(s);
        for (std::size_t i = 1; i < d; ++i) CHECK(eig.values[i - 1] >= eig.values[i]);
        SymMatrix rebuilt(d);
        for (std::size_t i = 0; i < d; ++i) rebuilt.rank_one_update(eig.vectors[i], eig.values[i]);
        CHECK((rebuilt - s).frobenius_norm() <= 1e-8 * (1 + s.frobenius_norm()));
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                CHECK(std::fabs(dot(eig.vectors[i], eig.vectors[j]) - (i == j ? 1.0 : 0.0)) <= 1e-10);

        // orthogonal similarity leaves the spectrum unchanged
        const auto rotated = sym_eigendecomposition(oracle::conjugate(s, oracle::random_orthogonal(d, rng)));
        for (std::size_t i = 0; i < d; ++i) CHECK(std::fabs(rotated.values[i] - eig.values[i]) < 1e-8);
    }
}

TEST_CASE("Cholesky rejects indefinite input") {
    CHECK_FALSE(Cholesky::is_positive_definite(SymMatrix::diagonal(Vector{1, -1})));
    CHECK_THROWS_AS(Cholesky(SymMatrix::diagonal(Vector{1, 0})), SingularSystem);
    const Cholesky c(SymMatrix::diagonal(Vector{2, 4}));
    CHECK(c.inverse_trace() == doctest::Approx(0.75));
}

}  // TEST_SUITE
