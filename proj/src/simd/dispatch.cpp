#include <atomic>
#include <cstdlib>
#include <string>

#include "adlab/simd/kernels.hpp"

namespace adlab::simd {
namespace {

const KernelTable* lookup(Backend backend) noexcept {
    switch (backend) {
        case Backend::Scalar: return &scalar_kernels();
        case Backend::Avx2: return avx2_kernels();
        case Backend::Neon: return neon_kernels();
    }
    return nullptr;
}

const KernelTable* initial_selection() noexcept {
    if (const char* env = std::getenv("ADAPTIVE_LAB_SIMD")) {
        const std::string name(env);
        if (name == "scalar") return &scalar_kernels();
        if (name == "avx2" && avx2_kernels()) return avx2_kernels();
        if (name == "neon" && neon_kernels()) return neon_kernels();
    }
    if (const KernelTable* t = avx2_kernels()) return t;
    if (const KernelTable* t = neon_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> table{initial_selection()};
    return table;
}

}  // namespace

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool select_backend(Backend backend) noexcept {
    const KernelTable* t = lookup(backend);
    if (!t) return false;
    current().store(t, std::memory_order_relaxed);
    return true;
}

std::string_view backend_name(Backend backend) noexcept {
    switch (backend) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

}  // namespace adlab::simd
