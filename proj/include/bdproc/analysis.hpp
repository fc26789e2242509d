#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bdproc/kernels.hpp"
#include "bdproc/rates.hpp"

namespace bdproc {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// sup_{s>=0} (1 + p s) e^{-s}
double r_p(double p);
// sup_{s>=0} (1 + p s) e^{-s/2}
double C_p(double p);
// argmax and max over s >= 0 of s (1 + p s) e^{-s}
double establishment_argmax(double p);
double establishment_peak(double p);

// b_f(s) <= height * (1+s)^(-exponent) for all s; used to bound series tails.
struct PowerTail {
  double height = 1.0;
  double exponent = 2.0;
};

struct LatticeBoundInput {
  std::function<double(double)> b_f;  // nonincreasing envelope
  double support = std::numeric_limits<double>::infinity();
  std::optional<PowerTail> tail;  // required when the support is unbounded
  double alpha = 1.0;
  double rho = 1.0;
  int dim = 1;
  // Distances beyond this never occur (window diameter); b_f is cut there.
  std::optional<double> truncate;
};

struct LatticeBoundResult {
  double bound = 0.0;      // prefactor * series
  double series = 0.0;     // sum_j b_f((q|j| - rho) v 0), upper estimate
  double prefactor = 0.0;  // e^alpha / (alpha e)
  double q = 0.0;
  double tail = 0.0;       // certified bound on the part not summed explicitly
  std::size_t terms = 0;
};

// Upper bound on sup_{x,eta} sum_y f(x-y) exp(-sum_{z!=y} g(z-y)) for
// f <= b_f(|.|) and g >= alpha on |x| <= rho.
LatticeBoundResult lattice_bound(const LatticeBoundInput& in);

// Constant M with |b(x, eta + x') - b(x, eta)| <= M G(x - x').
double lipschitz_constant(const BirthModel& m, const Window& w, const GWeight& gw);

struct CgResult {
  RadialKernel cg;
  double C = 0.0;      // b_g(s) <= C (1+s)^{-d-2 eps}
  double R = 0.0;
  double R1 = 0.0;     // infinite when b_g(R) = 0
  double plateau = 0.0;
  double g_mass = 0.0;
  double cg_mass = 0.0;      // including the analytic power-law tail
  double tail_bound = 0.0;   // sigma_d int_R^inf (1+s)^{-d-3eps/2} s^{d-1} ds
};

// Dominating kernel c_g >= g with <c_g> < 1. `C` defaults to the smallest
// constant found on the grid.
CgResult build_cg(const RadialKernel& g, double eps, std::optional<double> C = std::nullopt,
                  double grid_spacing = 1e-3);

struct FixpointOptions {
  double residual_tol = 1e-8;
  double mass_tol = 1e-7;      // relative mass deficit allowed from the finite domain
  int max_iterations = 10000;
  std::size_t max_points = std::size_t{1} << 24;
  double spacing = 0.0;        // 0: cutoff/256 (d=1), /64 (d=2), /512 (d=3)
};

struct FixpointResult {
  int dim = 1;
  double spacing = 0.0;
  double domain = 0.0;        // f computed on |x| <= domain (per axis for d <= 2)
  std::vector<double> r;      // radial nodes 0, h, 2h, ...
  std::vector<double> f;      // f at the radial nodes
  std::vector<double> cg;     // c_g at the radial nodes
  double f_mass = 0.0;        // grid mass of f
  double cg_mass_grid = 0.0;  // grid mass of c_g consistent with the discrete convolution
  double cg_mass = 0.0;       // quadrature mass of c_g
  double residual = 0.0;      // sup |f - c_g - c_g * f| on the grid
  double mass_deficit = 0.0;  // relative, against cg_mass_grid / (1 - cg_mass_grid)
  int iterations = 0;

  // Linear interpolation in r; 0 beyond the domain.
  double at(double r) const;
  // Relative mismatch of <f> against <c>/(1-<c>) with grid masses.
  double mass_balance_error() const;
};

// Solves f = c_g + c_g * f by fixed-point iteration from f_0 = c_g.
FixpointResult convolution_fixpoint(const RadialKernel& cg, const FixpointOptions& opt = {});

struct SubcriticalReport {
  double r_p = 1.0;
  double g_mass = 0.0;
  bool verdict = false;
  std::optional<RadialKernel> g;
  std::optional<CgResult> cg;
  std::optional<FixpointResult> fixpoint;
  std::vector<std::string> notes;
};

// Sublinear envelope g (r_p a, or g itself for Contact), its mass, and when
// subcritical the c_g / fixpoint pipeline.
SubcriticalReport subcritical_check(const BirthModel& m, double eps, bool run_fixpoint = true,
                                    const FixpointOptions& opt = {});

// Per-replicate series sampled at common times.
struct SupermartingaleInput {
  std::vector<double> times;
  std::vector<std::vector<double>> F;         // F(eta_t) per replicate
  std::vector<std::vector<double>> integral;  // int_0^t <c_g, eta_s> ds per replicate
  std::vector<bool> extinct;                  // empty at the final time
};

struct SupermartingaleRow {
  double t = 0.0;
  double lhs = 0.0;     // mean of F(eta_t) + integral
  double rhs = 0.0;     // mean of F(eta_0)
  double margin = 0.0;  // 3 standard errors of the paired difference
  bool pass = true;
};

struct SupermartingaleReport {
  std::vector<SupermartingaleRow> rows;
  bool pass = true;
  double extinction_fraction = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  std::size_t replicates = 0;
};

SupermartingaleReport supermartingale_audit(const SupermartingaleInput& in, double sigmas = 3.0);

}  // namespace bdproc
