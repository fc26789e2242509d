#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bdproc/geometry.hpp"
#include "bdproc/numerics.hpp"
#include "bdproc/rng.hpp"

namespace bdproc {

class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace profile {
struct Zero {};
struct TopHat {
  double height = 1.0;
  double radius = 1.0;
};
// height * (1 - r/radius) on [0, radius]
struct Triangular {
  double height = 1.0;
  double radius = 1.0;
};
// height * exp(-r^2 / (2 sigma^2))
struct Gaussian {
  double height = 1.0;
  double sigma = 1.0;
};
// height * (1 + r)^(-exponent)
struct PowerLaw {
  double height = 1.0;
  double exponent = 3.0;
};
// Piecewise-linear through (r[i], v[i]); zero beyond the last radius.
struct Tabulated {
  std::vector<double> r;
  std::vector<double> v;
};
// Programmatic profile (derived kernels such as c_g). Not serializable.
struct Custom {
  std::string name;
  std::function<double(double)> fn;
  double support = std::numeric_limits<double>::infinity();
  std::vector<double> breaks;
  bool nonincreasing = true;
};
}  // namespace profile

using Profile = std::variant<profile::Zero, profile::TopHat, profile::Triangular, profile::Gaussian,
                             profile::PowerLaw, profile::Tabulated, profile::Custom>;

struct KernelOptions {
  // Overrides the automatic truncation radius of infinite-support profiles.
  std::optional<double> cutoff;
  // Infinite-support profiles are cut where the omitted mass falls below
  // truncation_tol * full mass.
  double truncation_tol = 1e-6;
};

// Nonnegative radial profile with a hard cutoff, evaluated in dimension d.
class RadialKernel {
 public:
  RadialKernel() : RadialKernel(profile::Zero{}, 1) {}
  RadialKernel(Profile p, int dim, KernelOptions opt = {});

  double operator()(double r) const { return r > cutoff_ ? 0.0 : raw(r); }
  // Profile ignoring the cutoff.
  double raw(double r) const;

  int dim() const { return dim_; }
  double cutoff() const { return cutoff_; }
  bool is_zero() const { return zero_; }
  bool nonincreasing() const { return nonincreasing_; }
  // sigma_d * int_0^cutoff k(r) r^{d-1} dr
  double mass() const { return mass_; }
  // Mass without truncation (analytic where available).
  double full_mass() const { return full_mass_; }
  double omitted_mass() const { return full_mass_ - mass_; }
  double peak() const;
  // Maximum of the profile on [lo, hi] (exact for the built-in profiles).
  double max_on(double lo, double hi) const;
  // Radii where the profile has kinks or jumps, inside [0, cutoff].
  std::vector<double> breakpoints() const;

  const Profile& profile() const { return profile_; }
  RadialKernel scaled(double factor) const;
  // Smallest nonincreasing profile dominating this one.
  RadialKernel nonincreasing_envelope() const;

  // Text form accepted by parse_kernel (Custom profiles are described but
  // cannot be parsed back).
  std::string describe() const;

 private:
  void finish(const KernelOptions& opt);

  Profile profile_;
  int dim_;
  KernelOptions opt_;
  double scale_ = 1.0;
  double cutoff_ = 0.0;
  double mass_ = 0.0;
  double full_mass_ = 0.0;
  bool zero_ = false;
  bool nonincreasing_ = true;
};

// Parses "tophat height=0.5 radius=1", "gaussian sigma=1 mass=0.8",
// "powerlaw height=1 exponent=4 cutoff=5", "tabulated path=k.txt" or
// "tabulated r=0,1 v=1,0", "zero". `mass=` may replace `height=`.
RadialKernel parse_kernel(const std::string& spec, int dim, const std::string& base_dir = ".");
profile::Tabulated load_tabulated(const std::string& path);

// sigma_d * int_lo^hi f(r) r^{d-1} dr, split at `breaks`, midpoint rule.
double radial_integral(const std::function<double(double)>& f, int dim, double lo, double hi,
                       const std::vector<double>& breaks, double rel_tol = 1e-8);

// sigma_d * int_R^inf (1+r)^{-beta} r^{d-1} dr; requires beta > d.
double power_tail(int dim, double beta, double R);
// sigma_d * int_R^inf exp(-r^2/2s^2) r^{d-1} dr
double gaussian_tail(int dim, double sigma, double R);

struct GWeight {
  double eps = 1.0;
  int dim = 1;
  double operator()(double r) const { return real_pow(1.0 + r, -dim - eps); }
};

double g_weight(const Vec& x, const GWeight& gw);

struct ConditionGrid {
  double spacing = 1e-3;
  // Largest radius sampled; defaults to the largest kernel cutoff.
  std::optional<double> r_max;
};

struct KernelConditionReport {
  double B_found = 1.0;       // smallest B >= 1 with a <= B G^2 and phi <= B G
  double B_linear = 1.0;      // smallest B >= 1 with a <= B G and phi <= B G
  double alpha = 0.0;         // phi >= alpha on |x| <= rho
  double rho = 0.0;
  double p_found = 0.0;       // smallest p with c <= p phi
  bool bounded_by_G = true;   // a <= B G^2, phi <= B G for finite B
  bool phi_floor = false;     // alpha > 0 and rho > 0
  bool c_dominated = true;    // p finite
  std::size_t samples = 0;
  std::string note;
  std::vector<std::string> failures;

  bool all() const { return bounded_by_G && phi_floor && c_dominated; }
};

KernelConditionReport check_conditions(const RadialKernel& a, const RadialKernel& phi,
                                       const RadialKernel& c, const GWeight& gw,
                                       const ConditionGrid& grid = {});

// Exact sampler of displacements with density proportional to k(|x|), by
// rejection from a piecewise-constant radial envelope.
class RadialSampler {
 public:
  RadialSampler() = default;
  RadialSampler(const RadialKernel& k, int bins = 512);

  Vec sample(Rng& rng) const;
  bool empty() const { return cum_.empty(); }

 private:
  RadialKernel kernel_;
  int dim_ = 1;
  std::vector<double> edges_;
  std::vector<double> env_;
  std::vector<double> cum_;
};

}  // namespace bdproc
