#pragma once

#include <span>
#include <vector>

namespace leakdet::stats {

// Linear interpolation between order statistics ("type 7"). Input must be sorted.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> x);

// True when every element equals the first; the zero-variance test used
// throughout feature and correlation guards.
bool is_constant(std::span<const double> x);

// Pearson correlation; caller guarantees neither input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace leakdet::stats
