#pragma once

#include <cstdint>

namespace adlab {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of replication `rep` in grid cell `cell`. For a fixed (master, cell)
/// the map rep -> seed is injective, so replication streams never share a key.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) noexcept {
    constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
    const std::uint64_t cell_key = mix64(mix64(master) ^ (cell * golden + 0x632be59bd9b4e019ULL));
    return mix64(cell_key ^ (rep * golden + 0x2545f4914f6cdd1dULL));
}

/// Counter-based generator: draw k is mix64(key + k * golden). The state is the
/// (key, counter) pair, so streams are reproducible from the key alone and
/// independent of how other streams are scheduled.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1].
    double uniform_open_left() noexcept { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }
    /// Uniform integer in [0, n) by 128-bit multiply-shift.
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }
    /// Standard normal by Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;
    /// +1 or -1 with equal probability.
    double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace adlab
