#pragma once

#include <span>
#include <vector>

namespace condvine {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and U(0,1).
double ks_uniform(std::span<const double> values);

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `values` is copied, not reordered.
double quantile(std::span<const double> values, double prob);
double median(std::span<const double> values);

double mean(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace condvine
