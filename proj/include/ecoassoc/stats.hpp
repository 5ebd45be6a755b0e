#pragma once

#include "ecoassoc/rng.hpp"
#include "ecoassoc/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ecoassoc::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n − 1); 0 for fewer than two values.
double stddev(std::span<const double> x);

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
double quantile(std::vector<double> x, double q);

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> x);

double normal_cdf(double z);

struct MannWhitney {
  double u = 0.0; // U of the first sample
  double p = 1.0; // one-sided, first sample stochastically greater
  bool exact = false;
};

/// Exact enumeration of the rank-sum distribution (ties included) when both
/// samples have at most `exact_limit` values, normal approximation with tie
/// correction otherwise.
MannWhitney mann_whitney_greater(std::span<const double> x, std::span<const double> y,
                                 std::size_t exact_limit = 20);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

} // namespace ecoassoc::stats
