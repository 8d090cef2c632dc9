#include "adlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "adlab/errors.hpp"

namespace adlab::stats {

double normal_pdf(double x) noexcept { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double low = 0.02425;
    double x;
    if (p < low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double truncated_second_moment(double c) noexcept {
    c = std::abs(c);
    return 2.0 * c * normal_pdf(c) + std::erfc(c / std::numbers::sqrt2);
}

double kolmogorov_survival(double x) noexcept {
    if (!(x > 0.0)) return 1.0;
    if (x < 1.18) {
        // P(K <= x) = sqrt(2 pi)/x sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))
        const double base = -std::numbers::pi * std::numbers::pi / (8.0 * x * x);
        double cdf = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(odd * odd * base);
            cdf += term;
            if (term < 1e-17) break;
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / x;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_normality(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 8) throw TooFewSamples("ks_normality: needs at least 8 values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double nn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = normal_cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
    }
    return {d, kolmogorov_survival(std::sqrt(nn) * d)};
}

double mean(std::span<const double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
    if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

double median(std::span<const double> values) {
    std::vector<double> finite;
    finite.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(finite.begin(), finite.end());
    const std::size_t n = finite.size();
    return n % 2 ? finite[n / 2] : 0.5 * (finite[n / 2 - 1] + finite[n / 2]);
}

}  // namespace adlab::stats
