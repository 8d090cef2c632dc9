#include "adlab/simd/kernels.hpp"

namespace adlab::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 += a[i] * b[i];
        l1 += a[i + 1] * b[i + 1];
        l2 += a[i + 2] * b[i + 2];
        l3 += a[i + 3] * b[i + 3];
    }
    double s = (l0 + l1) + (l2 + l3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void syr_scalar(double alpha, const double* x, double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        double* row = a + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += alpha * (xi * x[j]);
    }
}

void gemv_scalar(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = dot_scalar(a + i * n, x, n);
}

void scale_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
    static const KernelTable table{Backend::Scalar, dot_scalar, axpy_scalar, syr_scalar, gemv_scalar, scale_scalar};
    return table;
}

}  // namespace adlab::simd
