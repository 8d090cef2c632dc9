// Compiled with -mavx2 (no -mfma): see src/CMakeLists.txt.
#include "adlab/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__)
#include <immintrin.h>

namespace adlab::simd {
namespace {

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, prod);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void syr_avx2(double alpha, const double* x, double* a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    for (std::size_t r = 0; r < n; ++r) {
        const double xr = x[r];
        const __m256d vxr = _mm256_set1_pd(xr);
        double* row = a + r * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const __m256d term = _mm256_mul_pd(va, _mm256_mul_pd(vxr, _mm256_loadu_pd(x + j)));
            _mm256_storeu_pd(row + j, _mm256_add_pd(_mm256_loadu_pd(row + j), term));
        }
        for (; j < n; ++j) row[j] += alpha * (xr * x[j]);
    }
}

void gemv_avx2(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t r = 0; r < n; ++r) y[r] = dot_avx2(a + r * n, x, n);
}

void scale_avx2(double alpha, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    for (; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
    static const bool supported = __builtin_cpu_supports("avx2");
    static const KernelTable table{Backend::Avx2, dot_avx2, axpy_avx2, syr_avx2, gemv_avx2, scale_avx2};
    return supported ? &table : nullptr;
}

}  // namespace adlab::simd

#else

namespace adlab::simd {
const KernelTable* avx2_kernels() noexcept { return nullptr; }
}  // namespace adlab::simd

#endif
