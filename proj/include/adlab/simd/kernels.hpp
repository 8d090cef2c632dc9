#pragma once

// Dense double-precision inner loops used by the Gram updates, candidate
// scoring and solvers. Every backend accumulates in four interleaved lanes
// (lane j sums elements i with i % 4 == j) and combines them as
// (l0 + l1) + (l2 + l3), then adds the scalar tail. Products are never fused,
// so the scalar reference and the vector backends agree bit for bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace adlab::simd {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    Backend backend;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // A += alpha * (x x^T), evaluated as alpha * (x[i] * x[j]) so the result stays exactly symmetric
    void (*syr)(double alpha, const double* x, double* a, std::size_t n);
    // y = A x for an n x n row-major matrix
    void (*gemv)(const double* a, const double* x, double* y, std::size_t n);
    // x *= alpha
    void (*scale)(double alpha, double* x, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
// Null when the backend was not compiled in or the CPU lacks the extension.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

// Kernels chosen at first use: the best supported backend, unless the
// ADAPTIVE_LAB_SIMD environment variable names one ("scalar", "avx2", "neon").
const KernelTable& active() noexcept;
// Overrides the active backend (tests and the CLI). Returns false when the
// requested backend is unavailable, leaving the selection unchanged.
bool select_backend(Backend backend) noexcept;

std::string_view backend_name(Backend backend) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void scale(double alpha, std::span<double> x) noexcept {
    active().scale(alpha, x.data(), x.size());
}

}  // namespace adlab::simd
