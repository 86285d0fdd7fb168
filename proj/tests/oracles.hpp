#pragma once

// Test-only reference computations, independent of the library code paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

namespace oracle {

/// Classical fixed-step RK4 for a scalar autonomous ODE.
inline double rk4(const std::function<double(double)>& f, double x0, double t_end, std::size_t steps) {
  const double h = t_end / static_cast<double>(steps);
  double x = x0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double k1 = f(x);
    const double k2 = f(x + 0.5 * h * k1);
    const double k3 = f(x + 0.5 * h * k2);
    const double k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

/// Brute-force min of g(w0, 1 - w0) over a uniform w0 grid of `points` points on [0, 1].
inline double simplex_min_1d(const std::function<double(double, double)>& g, std::size_t points) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points; ++i) {
    const double w0 = static_cast<double>(i) / static_cast<double>(points - 1);
    best = std::min(best, g(w0, 1.0 - w0));
  }
  return best;
}

/// Composite midpoint rule.
inline double midpoint(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f(a + (static_cast<double>(i) + 0.5) * h);
  return acc * h;
}

/// Bisection root of a monotone function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((f(lo) < 0.0) == (f(mid) < 0.0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
