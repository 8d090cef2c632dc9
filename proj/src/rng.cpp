#include "adlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace adlab {

double CounterRng::normal() noexcept {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = uniform_open_left();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
}

}  // namespace adlab
