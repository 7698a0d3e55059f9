#pragma once

#include <span>
#include <vector>

namespace condsub::stats {

double mean(std::span<const double> x);

/// Sample variance (n - 1 denominator). Zero for fewer than two values.
double variance(std::span<const double> x);
double sd(std::span<const double> x);

/// Standard error of the mean, sd / sqrt(n).
double standard_error(std::span<const double> x);

/// Type-7 quantile (linear interpolation between order statistics, the R
/// default). `sorted` must be ascending and non-empty; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Type-7 quantile of an unsorted sample.
double quantile(std::span<const double> x, double p);

double median(std::span<const double> x);

/// Average ranks (1-based), ties receive the mean of their positions.
std::vector<double> ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation: Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace condsub::stats
