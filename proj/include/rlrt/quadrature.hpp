#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "rlrt/errors.hpp"

namespace rlrt::quadrature {

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  int panels = 0;
};

struct Options {
  double abs_tol = 1e-10;
  int max_panels = 2000;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.00000000000000000e+00, 2.07784955007898468e-01, 4.05845151377397167e-01,
    5.86087235467691130e-01, 7.41531185599394440e-01, 8.64864423359769073e-01,
    9.49107912342758525e-01, 9.91455371120812639e-01,
};
inline constexpr std::array<double, 8> kKronrodWeights = {
    2.09482141084727828e-01, 2.04432940075298892e-01, 1.90350578064785410e-01,
    1.69004726639267903e-01, 1.40653259715525919e-01, 1.04790010322250184e-01,
    6.30920926299785533e-02, 2.29353220105292250e-02,
};
// Gauss weights for the odd Kronrod nodes (0, 2, 4, 6).
inline constexpr std::array<double, 4> kGaussWeights = {
    4.17959183673469388e-01, 3.81830050505118945e-01,
    2.79705391489276668e-01, 1.29484966168869693e-01,
};

struct Panel {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gauss_kronrod_15(F& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[0];
  double gauss = fc * kGaussWeights[0];
  for (std::size_t i = 1; i < kKronrodNodes.size(); ++i) {
    const double dx = half * kKronrodNodes[i];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[i] * sum;
    if (i % 2 == 0) gauss += kGaussWeights[i / 2] * sum;
  }
  return {lo, hi, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) integration of f over [lo, hi].
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below `abs_tol`. Throws NumericError if `max_panels` is
/// exhausted first. The integrand is only sampled strictly inside each panel,
/// so integrable endpoint singularities never trigger a division by zero,
/// though they converge slowly; transform those away before calling.
template <class F>
Result integrate(F&& f, double lo, double hi, const Options& opts = {}) {
  if (!(lo <= hi)) throw DomainError("integrate: lower limit exceeds upper limit");
  if (lo == hi) return {};

  std::priority_queue<detail::Panel> panels;
  panels.push(detail::gauss_kronrod_15(f, lo, hi));
  double total = panels.top().value;
  double error = panels.top().error;
  int count = 1;

  while (error > opts.abs_tol) {
    if (count >= opts.max_panels) {
      throw NumericError("integrate: panel cap " + std::to_string(opts.max_panels) +
                         " reached with error estimate " + std::to_string(error));
    }
    const detail::Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const detail::Panel left = detail::gauss_kronrod_15(f, worst.lo, mid);
    const detail::Panel right = detail::gauss_kronrod_15(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }

  // Re-sum to shed the drift accumulated by the incremental updates.
  double value = 0.0;
  double err = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  return {value, err, count};
}

}  // namespace rlrt::quadrature
