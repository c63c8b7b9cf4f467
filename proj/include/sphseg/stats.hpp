#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sphseg::stats {

double mean(std::span<const double> values);

/// Population standard deviation (divide by N).
double population_std(std::span<const double> values);

/// Linear-interpolated percentile of a sorted sample: index h = (n-1)*p,
/// value interpolated between the two bracketing order statistics.
double percentile_sorted(std::span<const double> sorted, double p);

/// Convenience: copies, sorts, interpolates.
double percentile(std::span<const double> values, double p);
double median(std::span<const double> values);

/// Average ranks (1-based); tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation: Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

} // namespace sphseg::stats
