#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the finite-difference solver or the path simulator.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "gexp/payoff.hpp"

namespace gexp::oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Composite Simpson rule for E[f(Z)], Z ~ N(0, 1), on [-10, 10].
inline double gaussian_expectation(const std::function<double(double)>& f, int panels = 4000) {
  const double a = -10.0, b = 10.0;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double z = a + i * h;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * f(z) * normal_pdf(z);
  }
  return sum * h / 3.0;
}

/// Classical E[phi(sigma sqrt(t) Z)].
inline double classical_terminal(const PayoffExpr& phi, double sigma, double t) {
  const double s = sigma * std::sqrt(t);
  return gaussian_expectation([&](double z) {
    const double x = s * z;
    return phi.evaluate_unchecked(std::span<const double>(&x, 1));
  });
}

/// Classical E[phi(s1 Z1, s2 Z2)] for independent increments with standard deviations s1, s2.
inline double classical_two_increments(const PayoffExpr& phi, double s1, double s2,
                                       int panels = 400) {
  return gaussian_expectation(
      [&](double z1) {
        return gaussian_expectation(
            [&](double z2) {
              const double x[2] = {s1 * z1, s2 * z2};
              return phi.evaluate_unchecked(x);
            },
            panels);
      },
      panels);
}

/// Brute-force max over constant-per-interval volatilities on a uniform grid of
/// the band: a lower bound for the G-expectation of a two-increment payoff.
inline double max_over_constant_controls(const PayoffExpr& phi, double sigma_low,
                                         double sigma_high, double t1, double t2, int levels = 5) {
  double best = -INFINITY;
  for (int i = 0; i < levels; ++i)
    for (int j = 0; j < levels; ++j) {
      const double a = sigma_low + (sigma_high - sigma_low) * i / (levels - 1);
      const double b = sigma_low + (sigma_high - sigma_low) * j / (levels - 1);
      best = std::max(best, classical_two_increments(phi, a * std::sqrt(t1),
                                                     b * std::sqrt(t2 - t1)));
    }
  return best;
}

}  // namespace gexp::oracle
