#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace adlab {

using Vector = std::vector<double>;

/// Dense symmetric matrix in full row-major storage. Every mutator writes
/// both triangles, so entry (i, j) and (j, i) are always bit-identical.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

    static SymMatrix identity(std::size_t dim, double scale = 1.0);
    static SymMatrix diagonal(std::span<const double> diag);
    /// Builds from row-major entries; throws InvalidArgument unless exactly symmetric.
    static SymMatrix from_rows(std::size_t dim, std::span<const double> entries);
    static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    /// Returns u u^T scaled by alpha.
    static SymMatrix outer(std::span<const double> u, double alpha = 1.0);

    std::size_t dim() const noexcept { return dim_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * dim_ + j]; }
    void set(std::size_t i, std::size_t j, double value) noexcept {
        data_[i * dim_ + j] = value;
        data_[j * dim_ + i] = value;
    }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
    std::span<const double> data() const noexcept { return data_; }

    /// this += alpha * x x^T
    void rank_one_update(std::span<const double> x, double alpha = 1.0);
    void add_identity(double lambda) noexcept;
    void scale(double alpha) noexcept;
    SymMatrix& operator+=(const SymMatrix& other);
    SymMatrix& operator-=(const SymMatrix& other);

    Vector multiply(std::span<const double> x) const;
    void multiply_into(std::span<const double> x, std::span<double> out) const noexcept;

    double trace() const noexcept;
    double frobenius_norm() const noexcept;
    double max_abs_asymmetry() const noexcept;

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    std::size_t dim_ = 0;
    Vector data_;
};

struct EigenDecomposition {
    Vector values;                 // descending
    std::vector<Vector> vectors;   // vectors[i] pairs with values[i]
};

/// Lower-triangular Cholesky factor of an SPD matrix.
class Cholesky {
public:
    /// Throws SingularSystem when a pivot is not strictly positive.
    explicit Cholesky(const SymMatrix& s);
    /// Returns false instead of throwing.
    static bool is_positive_definite(const SymMatrix& s);

    std::size_t dim() const noexcept { return dim_; }
    Vector solve(std::span<const double> b) const;
    /// Tr(S^{-1}).
    double inverse_trace() const;

private:
    std::size_t dim_ = 0;
    Vector lower_;  // row-major, upper triangle unused
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
Vector add_scaled(std::span<const double> a, std::span<const double> b, double beta);  // a + beta*b

/// Eigenvalue floor used for numerical singularity: 1e-10 * |Tr S| (1e-300 for S = 0).
double eigen_tolerance(const SymMatrix& s) noexcept;

/// (S + lambda I)^{-1} b. lambda > 0 goes through Cholesky of S + lambda I;
/// lambda = 0 requires the smallest eigenvalue of S to exceed eigen_tolerance(S),
/// otherwise SingularSystem.
Vector ridge_solve(const SymMatrix& s, std::span<const double> b, double lambda);

/// S^+ b with eigenvalues <= rank_tol * lambda_max treated as zero.
Vector pseudo_inverse_apply(const SymMatrix& s, std::span<const double> b, double rank_tol = 1e-10);

/// Tr((S + lambda I)^{-1} S) for lambda > 0.
double effective_dimension(const SymMatrix& s, double lambda);

double quadratic_form(const SymMatrix& s, std::span<const double> v);

/// Cyclic Jacobi; stops once the off-diagonal Frobenius norm falls below
/// 1e-12 * ||S||_F, throws NonConvergence after 100 * dim sweeps.
EigenDecomposition sym_eigendecomposition(const SymMatrix& s);

}  // namespace adlab
