#include "adlab/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace adlab::simd {
namespace {

// Two float64x2 accumulators hold lanes {0,1} and {2,3}.
double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t lo = vdupq_n_f64(0.0);
    float64x2_t hi = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double s = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) + (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void syr_neon(double alpha, const double* x, double* a, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    for (std::size_t r = 0; r < n; ++r) {
        const double xr = x[r];
        const float64x2_t vxr = vdupq_n_f64(xr);
        double* row = a + r * n;
        std::size_t j = 0;
        for (; j + 2 <= n; j += 2) {
            const float64x2_t term = vmulq_f64(va, vmulq_f64(vxr, vld1q_f64(x + j)));
            vst1q_f64(row + j, vaddq_f64(vld1q_f64(row + j), term));
        }
        for (; j < n; ++j) row[j] += alpha * (xr * x[j]);
    }
}

void gemv_neon(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t r = 0; r < n; ++r) y[r] = dot_neon(a + r * n, x, n);
}

void scale_neon(double alpha, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    for (; i < n; ++i) x[i] *= alpha;
}

}  // namespace

const KernelTable* neon_kernels() noexcept {
    static const KernelTable table{Backend::Neon, dot_neon, axpy_neon, syr_neon, gemv_neon, scale_neon};
    return &table;
}

}  // namespace adlab::simd

#else

namespace adlab::simd {
const KernelTable* neon_kernels() noexcept { return nullptr; }
}  // namespace adlab::simd

#endif
