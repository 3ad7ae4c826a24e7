#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "armcast/rng.hpp"

namespace armcast {

/// Mean squared error over scalar residuals, unnormalized (pixel² units).
inline double mse(std::span<const double> y, std::span<const double> p) {
  if (y.size() != p.size()) throw std::invalid_argument("mse: length mismatch");
  if (y.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - p[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

/// Mean absolute error over scalar residuals (pixel units).
inline double mae(std::span<const double> y, std::span<const double> p) {
  if (y.size() != p.size()) throw std::invalid_argument("mae: length mismatch");
  if (y.empty()) throw std::invalid_argument("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - p[i]);
  return acc / static_cast<double>(y.size());
}

/// k disjoint validation index sets: seeded shuffle, then contiguous chunks
/// of size ⌈N/k⌉ (first N mod k folds) or ⌊N/k⌋. Union covers 0..N−1 once.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                         std::uint64_t seed) {
  if (k < 2 || k > n) throw std::invalid_argument("kfold_split: need 2 <= k <= N");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t rem = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < rem ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<long>(pos), idx.begin() + static_cast<long>(pos + len));
    pos += len;
  }
  return folds;
}

struct BoxplotStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

/// Type-7 quantile: linear interpolation of order statistics at (N−1)·p.
inline double quantile_type7(std::vector<double> sorted, double p) {
  const double pos = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

/// Quartiles plus Tukey whiskers: most extreme data within 1.5·IQR of the
/// quartiles; points beyond are outliers.
inline BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("boxplot_stats: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BoxplotStats s;
  s.median = quantile_type7(sorted, 0.5);
  s.q1 = quantile_type7(sorted, 0.25);
  s.q3 = quantile_type7(sorted, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;

  s.whisker_lo = s.q3;
  s.whisker_hi = s.q1;
  bool any_in = false;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
    } else {
      if (!any_in) {
        s.whisker_lo = v;
        s.whisker_hi = v;
        any_in = true;
      } else {
        s.whisker_lo = std::min(s.whisker_lo, v);
        s.whisker_hi = std::max(s.whisker_hi, v);
      }
    }
  }
  return s;
}

inline double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double stddev_of(std::span<const double> v) {
  const double mu = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace armcast
