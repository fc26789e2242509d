#include "bdproc/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>

#include "bdproc/numerics.hpp"

namespace bdproc {

Summary summarize(const std::vector<double>& xs) {
  Welford w;
  for (double x : xs) w.add(x);
  Summary s;
  s.n = w.count();
  s.mean = w.mean();
  s.variance = w.variance();
  s.se = w.stderr_mean();
  s.ci_low = s.mean - 1.959963984540054 * s.se;
  s.ci_high = s.mean + 1.959963984540054 * s.se;
  return s;
}

namespace {

double two_sided_t(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  if (!(dof > 0.0) || !std::isfinite(dof)) return 2.0 * (1.0 - normal_cdf(std::abs(t)));
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  const Summary sa = summarize(a), sb = summarize(b);
  const double va = sa.variance / static_cast<double>(sa.n), vb = sb.variance / static_cast<double>(sb.n);
  TestResult r;
  const double se = std::sqrt(va + vb);
  if (se == 0.0) {
    r.statistic = 0.0;
    r.p_value = sa.mean == sb.mean ? 1.0 : 0.0;
    return r;
  }
  r.statistic = (sa.mean - sb.mean) / se;
  const double dof = (va + vb) * (va + vb) /
                     (va * va / static_cast<double>(sa.n - 1) + vb * vb / static_cast<double>(sb.n - 1));
  r.p_value = two_sided_t(r.statistic, dof);
  return r;
}

TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Summary s = summarize(d);
  TestResult r;
  if (s.se == 0.0) {
    r.p_value = s.mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = s.mean / s.se;
  r.p_value = two_sided_t(r.statistic, static_cast<double>(s.n - 1));
  return r;
}

TestResult ks_exponential(std::vector<double> xs, double rate) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = 1.0 - std::exp(-rate * xs[i]);
    dmax = std::max({dmax, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  TestResult r;
  r.statistic = dmax;
  const double sq = std::sqrt(n);
  r.p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * dmax);
  return r;
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace bdproc
