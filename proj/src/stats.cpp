#include "ecoassoc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ecoassoc::stats {

double mean(std::span<const double> x) {
  if (x.empty())
    return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2)
    return 0.0;
  const double mu = mean(x);
  double ss = 0.0;
  for (double v : x)
    ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double quantile(std::vector<double> x, double q) {
  if (x.empty())
    throw ValidationError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e + 1 < idx.size() && x[idx[e + 1]] == x[idx[s]])
      ++e;
    const double rank = 0.5 * static_cast<double>(s + e) + 1.0;
    for (std::size_t t = s; t <= e; ++t)
      r[idx[t]] = rank;
    s = e + 1;
  }
  return r;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MannWhitney mann_whitney_greater(std::span<const double> x, std::span<const double> y,
                                 std::size_t exact_limit) {
  MannWhitney out;
  const std::size_t n1 = x.size(), n2 = y.size();
  if (n1 == 0 || n2 == 0)
    return out;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto r = midranks(pooled);
  double r1 = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    r1 += r[i];
  const double n1d = static_cast<double>(n1), n2d = static_cast<double>(n2);
  out.u = r1 - n1d * (n1d + 1.0) / 2.0;

  if (n1 <= exact_limit && n2 <= exact_limit) {
    // Midranks are multiples of 1/2: count subsets of size n1 by doubled rank sum.
    std::vector<int> twice(r.size());
    int total = 0;
    for (std::size_t t = 0; t < r.size(); ++t) {
      twice[t] = static_cast<int>(std::lround(2.0 * r[t]));
      total += twice[t];
    }
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t t = 0; t < twice.size(); ++t)
      for (std::size_t j = std::min(t + 1, n1); j >= 1; --j)
        for (int s = total; s >= twice[t]; --s)
          ways[j][static_cast<std::size_t>(s)] += ways[j - 1][static_cast<std::size_t>(s - twice[t])];
    const int observed = static_cast<int>(std::lround(2.0 * r1));
    double tail = 0.0, all = 0.0;
    for (int s = 0; s <= total; ++s) {
      all += ways[n1][static_cast<std::size_t>(s)];
      if (s >= observed)
        tail += ways[n1][static_cast<std::size_t>(s)];
    }
    out.p = tail / all;
    out.exact = true;
    return out;
  }

  const double n = n1d + n2d;
  double ties = 0.0;
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t s = 0; s < sorted.size();) {
    std::size_t e = s;
    while (e + 1 < sorted.size() && sorted[e + 1] == sorted[s])
      ++e;
    const double t = static_cast<double>(e - s + 1);
    ties += t * t * t - t;
    s = e + 1;
  }
  const double var = n1d * n2d / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (var <= 0.0) {
    out.p = 1.0;
    return out;
  }
  const double z = (out.u - n1d * n2d / 2.0 - 0.5) / std::sqrt(var);
  out.p = 1.0 - normal_cdf(z);
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sxy += (x[t] - mx) * (y[t] - my);
    sxx += (x[t] - mx) * (x[t] - mx);
    syy += (y[t] - my) * (y[t] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("roc_auc: score and label counts differ");
  const auto r = midranks(scores);
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t]) {
      pos += 1.0;
      rank_sum += r[t];
    } else {
      neg += 1.0;
    }
  }
  if (pos == 0.0 || neg == 0.0)
    return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

} // namespace ecoassoc::stats
