#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "rlrt/errors.hpp"

namespace rlrt::normal {

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Computed directly rather than as 1 - cdf(x) so deep upper tails keep precision.
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("normal::quantile: probability must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, prob);
}

}  // namespace rlrt::normal
