#include "adlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "adlab/errors.hpp"
#include "adlab/simd/kernels.hpp"

namespace adlab {

SymMatrix SymMatrix::identity(std::size_t dim, double scale) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.data_[i * dim + i] = scale;
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m.data_[i * diag.size() + i] = diag[i];
    return m;
}

SymMatrix SymMatrix::from_rows(std::size_t dim, std::span<const double> entries) {
    if (entries.size() != dim * dim) throw InvalidArgument("SymMatrix::from_rows: entry count does not match dim^2");
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            if (entries[i * dim + j] != entries[j * dim + i]) {
                throw InvalidArgument("SymMatrix::from_rows: entries are not symmetric");
            }
        }
    }
    m.data_.assign(entries.begin(), entries.end());
    return m;
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t dim = rows.size();
    Vector entries;
    entries.reserve(dim * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) throw InvalidArgument("SymMatrix::from_rows: matrix is not square");
        entries.insert(entries.end(), r.begin(), r.end());
    }
    return from_rows(dim, entries);
}

SymMatrix SymMatrix::outer(std::span<const double> u, double alpha) {
    SymMatrix m(u.size());
    m.rank_one_update(u, alpha);
    return m;
}

void SymMatrix::rank_one_update(std::span<const double> x, double alpha) {
    if (x.size() != dim_) throw InvalidArgument("SymMatrix::rank_one_update: dimension mismatch");
    simd::active().syr(alpha, x.data(), data_.data(), dim_);
}

void SymMatrix::add_identity(double lambda) noexcept {
    for (std::size_t i = 0; i < dim_; ++i) data_[i * dim_ + i] += lambda;
}

void SymMatrix::scale(double alpha) noexcept { simd::active().scale(alpha, data_.data(), data_.size()); }

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    if (other.dim_ != dim_) throw InvalidArgument("SymMatrix::operator+=: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
    if (other.dim_ != dim_) throw InvalidArgument("SymMatrix::operator-=: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

Vector SymMatrix::multiply(std::span<const double> x) const {
    if (x.size() != dim_) throw InvalidArgument("SymMatrix::multiply: dimension mismatch");
    Vector out(dim_);
    multiply_into(x, out);
    return out;
}

void SymMatrix::multiply_into(std::span<const double> x, std::span<double> out) const noexcept {
    simd::active().gemv(data_.data(), x.data(), out.data(), dim_);
}

double SymMatrix::trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
    return t;
}

double SymMatrix::frobenius_norm() const noexcept { return std::sqrt(simd::dot(data_, data_)); }

double SymMatrix::max_abs_asymmetry() const noexcept {
    double worst = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = i + 1; j < dim_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
    return worst;
}

namespace {

// Returns false on a non-positive (or non-finite) pivot.
bool factorize(const SymMatrix& s, Vector& lower) {
    const std::size_t n = s.dim();
    lower.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = lower.data() + j * n;
        double pivot = s(j, j) - simd::active().dot(lj, lj, j);
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
        const double ljj = std::sqrt(pivot);
        lower[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double* li = lower.data() + i * n;
            lower[i * n + j] = (s(i, j) - simd::active().dot(li, lj, j)) / ljj;
        }
    }
    return true;
}

}  // namespace

Cholesky::Cholesky(const SymMatrix& s) : dim_(s.dim()) {
    if (!factorize(s, lower_)) throw SingularSystem("Cholesky: matrix is not positive definite");
}

bool Cholesky::is_positive_definite(const SymMatrix& s) {
    Vector scratch;
    return factorize(s, scratch);
}

Vector Cholesky::solve(std::span<const double> b) const {
    if (b.size() != dim_) throw InvalidArgument("Cholesky::solve: dimension mismatch");
    const std::size_t n = dim_;
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (x[i] - simd::active().dot(lower_.data() + i * n, x.data(), i)) / lower_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= lower_[k * n + i] * x[k];
        x[i] = s / lower_[i * n + i];
    }
    return x;
}

double Cholesky::inverse_trace() const {
    // Tr(S^{-1}) = ||L^{-1}||_F^2, built column by column.
    const std::size_t n = dim_;
    double total = 0.0;
    Vector col(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::fill(col.begin(), col.end(), 0.0);
        for (std::size_t i = c; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (std::size_t k = c; k < i; ++k) s -= lower_[i * n + k] * col[k];
            col[i] = s / lower_[i * n + i];
            total += col[i] * col[i];
        }
    }
    return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("dot: dimension mismatch");
    return simd::dot(a, b);
}

double norm2(std::span<const double> a) { return std::sqrt(simd::dot(a, a)); }

Vector add_scaled(std::span<const double> a, std::span<const double> b, double beta) {
    if (a.size() != b.size()) throw InvalidArgument("add_scaled: dimension mismatch");
    Vector out(a.begin(), a.end());
    simd::axpy(beta, b, out);
    return out;
}

double eigen_tolerance(const SymMatrix& s) noexcept {
    const double t = std::abs(s.trace());
    return t > 0.0 ? 1e-10 * t : 1e-300;
}

Vector ridge_solve(const SymMatrix& s, std::span<const double> b, double lambda) {
    if (b.size() != s.dim()) throw InvalidArgument("ridge_solve: dimension mismatch");
    if (!(lambda >= 0.0)) throw InvalidArgument("ridge_solve: lambda must be nonnegative");
    if (lambda == 0.0) {
        // lambda_min(S) > tol  <=>  S - tol I is positive definite.
        SymMatrix shifted = s;
        shifted.add_identity(-eigen_tolerance(s));
        if (!Cholesky::is_positive_definite(shifted)) {
            throw SingularSystem("ridge_solve: matrix is numerically singular and lambda = 0");
        }
        return Cholesky(s).solve(b);
    }
    SymMatrix reg = s;
    reg.add_identity(lambda);
    return Cholesky(reg).solve(b);
}

Vector pseudo_inverse_apply(const SymMatrix& s, std::span<const double> b, double rank_tol) {
    if (b.size() != s.dim()) throw InvalidArgument("pseudo_inverse_apply: dimension mismatch");
    Vector out(s.dim(), 0.0);
    if (s.dim() == 0) return out;
    const EigenDecomposition eig = sym_eigendecomposition(s);
    const double top = eig.values.front();
    if (!(top > 0.0)) return out;
    const double cut = rank_tol * top;
    for (std::size_t i = 0; i < eig.values.size(); ++i) {
        if (eig.values[i] <= cut) continue;
        const double coef = dot(eig.vectors[i], b) / eig.values[i];
        simd::axpy(coef, eig.vectors[i], out);
    }
    return out;
}

double effective_dimension(const SymMatrix& s, double lambda) {
    if (!(lambda > 0.0)) throw InvalidArgument("effective_dimension: lambda must be positive");
    // Tr((S + lambda I)^{-1} S) = d - lambda Tr((S + lambda I)^{-1})
    SymMatrix reg = s;
    reg.add_identity(lambda);
    const double n = static_cast<double>(s.dim());
    const double value = n - lambda * Cholesky(reg).inverse_trace();
    return std::clamp(value, 0.0, n);
}

double quadratic_form(const SymMatrix& s, std::span<const double> v) {
    if (v.size() != s.dim()) throw InvalidArgument("quadratic_form: dimension mismatch");
    Vector sv = s.multiply(v);
    return simd::dot(v, sv);
}

EigenDecomposition sym_eigendecomposition(const SymMatrix& s) {
    const std::size_t n = s.dim();
    Vector a(s.data().begin(), s.data().end());
    Vector v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    const double fro = s.frobenius_norm();
    const double stop = 1e-12 * fro;
    auto off_norm = [&] {
        double acc = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) acc += a[p * n + q] * a[p * n + q];
        return std::sqrt(2.0 * acc);
    };

    const std::size_t budget = 100 * std::max<std::size_t>(n, 1);
    std::size_t sweep = 0;
    while (fro > 0.0 && off_norm() > stop) {
        if (sweep++ >= budget) throw NonConvergence("sym_eigendecomposition: sweep budget exhausted");
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });

    EigenDecomposition out;
    out.values.reserve(n);
    out.vectors.reserve(n);
    for (std::size_t idx : order) {
        out.values.push_back(a[idx * n + idx]);
        Vector col(n);
        for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + idx];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

}  // namespace adlab
