#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace bdproc {

// Running mean / variance (Welford).
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double stderr_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double se = 0.0;
  double ci_low = 0.0;   // mean -/+ 1.96 se
  double ci_high = 0.0;
};

Summary summarize(const std::vector<double>& xs);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sided Welch t-test of equal means.
TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);
// Two-sided paired t-test of zero mean difference.
TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);
// One-sample Kolmogorov-Smirnov test against Exp(rate).
TestResult ks_exponential(std::vector<double> xs, double rate = 1.0);

// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

}  // namespace bdproc
