#pragma once

#include <span>
#include <vector>

namespace adlab::stats {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Inverse of normal_cdf on (0, 1); Acklam's rational start, two Halley steps.
double normal_quantile(double p);
/// E[Z^2 1{|Z| > c}] for Z ~ N(0, 1) and c >= 0.
double truncated_second_moment(double c) noexcept;

/// Kolmogorov limiting survival function P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
/// Below x = 1.18 the equivalent theta-function series is summed instead.
double kolmogorov_survival(double x) noexcept;

struct KsResult {
    double stat = 0.0;
    double pvalue = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1); p-value from the
/// asymptotic distribution of sqrt(n) D. Throws TooFewSamples when n < 8.
KsResult ks_normality(std::span<const double> values);

double mean(std::span<const double> values);
/// Unbiased (n - 1) sample variance.
double variance(std::span<const double> values);
/// Median of the finite entries; NaN when there are none.
double median(std::span<const double> values);

}  // namespace adlab::stats
