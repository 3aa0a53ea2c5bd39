#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace openset {

inline constexpr double neg_infinity = -std::numeric_limits<double>::infinity();

// log(sum_i exp(xs[i])) with the usual max shift. Empty input yields -inf
// (the log of an empty sum). A -inf entry contributes exp(-inf) = 0.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return neg_infinity;
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a stray +inf
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace openset
