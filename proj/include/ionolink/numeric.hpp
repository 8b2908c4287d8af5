#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "ionolink/errors.hpp"

namespace ionolink::num {

/// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double mean(std::span<const double> v) {
  require(!v.empty(), Errc::InsufficientData, "mean of empty range");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance (n-1 denominator).
inline double sample_variance(std::span<const double> v) {
  require(v.size() >= 2, Errc::InsufficientData, "variance needs at least 2 samples");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_std(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

}  // namespace ionolink::num
