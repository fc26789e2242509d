#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace bdproc {

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// x^e for x >= 0. Exponents that are multiples of 1/2 (the usual d + eps and
// d/2 choices) go through multiplications and one sqrt instead of std::pow.
inline double real_pow(double x, double e) {
  const double a = std::abs(e);
  if (a <= 16.0 && 2.0 * a == std::floor(2.0 * a)) {
    int n = static_cast<int>(a);
    double r = 1.0, b = x;
    for (; n != 0; n >>= 1, b *= b)
      if (n & 1) r *= b;
    if (a != std::floor(a)) r *= std::sqrt(x);
    return e < 0.0 ? 1.0 / r : r;
  }
  return std::pow(x, e);
}

// Surface area of the unit sphere in R^d.
inline double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    default: throw NumericsError("dimension must be 1, 2 or 3");
  }
}

// Volume of the unit ball in R^d.
inline double ball_volume(int d) { return sphere_area(d) / d; }

inline double midpoint_sum(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += f(a + (static_cast<double>(i) + 0.5) * h);
  return s * h;
}

// Composite midpoint rule on [a, b], doubling the node count until two
// successive estimates agree to `rel_tol` (or to `abs_tol`).
double midpoint_integral(const std::function<double(double)>& f, double a, double b, double rel_tol,
                         double abs_tol = 0.0, std::size_t max_nodes = std::size_t{1} << 24);

// Adaptive Gauss-Kronrod on [a, b] (finite interval).
double gk_integral(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-10);

// Kolmogorov distribution survival Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace bdproc
