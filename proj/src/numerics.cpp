#include "bdproc/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bdproc {

double midpoint_integral(const std::function<double(double)>& f, double a, double b, double rel_tol,
                         double abs_tol, std::size_t max_nodes) {
  if (!(b > a)) return 0.0;
  std::size_t n = 64;
  double prev = midpoint_sum(f, a, b, n);
  if (!std::isfinite(prev)) throw NumericsError("non-finite integrand sample");
  while (n < max_nodes) {
    n *= 2;
    const double cur = midpoint_sum(f, a, b, n);
    if (!std::isfinite(cur)) throw NumericsError("non-finite integrand sample");
    const double diff = std::abs(cur - prev);
    if (diff <= rel_tol * std::abs(cur) || diff <= abs_tol) return cur;
    prev = cur;
  }
  throw NumericsError("midpoint quadrature did not reach tolerance");
}

double gk_integral(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, rel_tol, &err);
  if (!std::isfinite(v)) throw NumericsError("non-finite integral");
  return v;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace bdproc
