#include "bdproc/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <limits>
#include <numbers>

#include "bdproc/numerics.hpp"
#include "bdproc/stats.hpp"

namespace bdproc {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double r_p(double p) {
  if (!(p >= 0.0)) throw AnalysisError("r_p needs p >= 0");
  if (std::isinf(p)) return p;
  return p <= 1.0 ? 1.0 : p * std::exp(1.0 / p - 1.0);
}

double C_p(double p) {
  if (!(p >= 0.0)) throw AnalysisError("C_p needs p >= 0");
  if (std::isinf(p)) return p;
  return p <= 0.5 ? 1.0 : 2.0 * p * std::exp(1.0 / (2.0 * p) - 1.0);
}

double establishment_argmax(double p) {
  if (!(p >= 0.0)) throw AnalysisError("establishment bound needs p >= 0");
  if (p == 0.0) return 1.0;
  return ((2.0 * p - 1.0) + std::sqrt(4.0 * p * p + 1.0)) / (2.0 * p);
}

double establishment_peak(double p) {
  const double s = establishment_argmax(p);
  return s * (1.0 + p * s) * std::exp(-s);
}

// ---------------------------------------------------------------------------

LatticeBoundResult lattice_bound(const LatticeBoundInput& in) {
  if (in.dim < 1 || in.dim > 3) throw AnalysisError("lattice bound: dimension must be 1, 2 or 3");
  if (!(in.alpha > 0.0) || !(in.rho > 0.0)) throw AnalysisError("lattice bound needs alpha > 0 and rho > 0");
  if (!in.b_f) throw AnalysisError("lattice bound needs an envelope b_f");
  const int d = in.dim;
  LatticeBoundResult res;
  res.q = in.rho / std::sqrt(static_cast<double>(d));
  res.prefactor = std::exp(in.alpha) / (in.alpha * std::numbers::e);
  const double q = res.q, rho = in.rho;

  const double reach = std::min(in.support, in.truncate.value_or(std::numeric_limits<double>::infinity()));
  auto bf = [&](double s) { return s > reach ? 0.0 : in.b_f(s); };

  {
    // monotonicity is a hypothesis; check it on a grid
    const double span = std::isfinite(reach) ? reach : 1e3 * (1.0 + rho);
    const int n = 4096;
    double prev = bf(0.0);
    if (!std::isfinite(prev) || prev < 0.0) throw AnalysisError("lattice bound: b_f(0) is not finite and >= 0");
    for (int i = 1; i <= n; ++i) {
      const double s = span * i / n;
      const double v = bf(s);
      if (v > prev * (1.0 + 1e-12) + 1e-300) {
        throw AnalysisError("lattice bound: b_f increases near s=" + fmt(s));
      }
      prev = v;
    }
  }

  auto term = [&](double jnorm) { return bf(std::max(q * jnorm - rho, 0.0)); };

  // Sum over the cube |j|_inf <= J.
  auto cube_sum = [&](long J) {
    double s = 0.0;
    std::size_t count = 0;
    if (d == 1) {
      s = term(0.0);
      for (long k = 1; k <= J; ++k) s += 2.0 * term(static_cast<double>(k));
      count = static_cast<std::size_t>(2 * J + 1);
    } else if (d == 2) {
      for (long i = -J; i <= J; ++i)
        for (long j = -J; j <= J; ++j) s += term(std::sqrt(static_cast<double>(i * i + j * j)));
      count = static_cast<std::size_t>((2 * J + 1) * (2 * J + 1));
    } else {
      for (long i = -J; i <= J; ++i)
        for (long j = -J; j <= J; ++j)
          for (long k = -J; k <= J; ++k) s += term(std::sqrt(static_cast<double>(i * i + j * j + k * k)));
      count = static_cast<std::size_t>((2 * J + 1) * (2 * J + 1) * (2 * J + 1));
    }
    res.terms = count;
    return s;
  };

  const double max_terms = 5e7;
  if (std::isfinite(reach)) {
    const long J = static_cast<long>(std::ceil((reach + rho) / q)) + 1;
    if (std::pow(2.0 * J + 1.0, d) <= max_terms) {
      res.series = cube_sum(J);
      res.tail = 0.0;
      res.bound = res.prefactor * res.series;
      return res;
    }
    if (!in.tail) throw AnalysisError("lattice bound: too many lattice terms and no power-law tail to bound the rest");
  }
  if (!in.tail) throw AnalysisError("lattice bound: unbounded support needs a power-law tail envelope");
  const double h = in.tail->height, beta = in.tail->exponent;
  if (!(beta > d)) throw AnalysisError("lattice bound: tail exponent must exceed d (series diverges)");

  if (d == 1) {
    // Explicit sum for |k| < N, Euler-Maclaurin upper estimate for the rest;
    // for a completely monotone tail the truncation after the f' term is an
    // upper bound.
    const long N = std::max<long>(static_cast<long>(std::ceil((rho + 1.0) / q)) + 1, 100000);
    double s = term(0.0);
    for (long k = 1; k < N; ++k) s += 2.0 * term(static_cast<double>(k));
    const double u = 1.0 + q * static_cast<double>(N) - rho;
    const double integral = h * std::pow(u, 1.0 - beta) / (q * (beta - 1.0));
    const double fN = h * std::pow(u, -beta);
    const double dfN = -h * beta * q * std::pow(u, -beta - 1.0);
    res.tail = 2.0 * (integral + 0.5 * fN - dfN / 12.0);
    res.series = s + res.tail;
    res.terms = static_cast<std::size_t>(2 * N - 1);
    res.bound = res.prefactor * res.series;
    return res;
  }

  const double c0 = q * std::sqrt(static_cast<double>(d)) / 2.0 + rho;
  const long cap = d == 2 ? 4096 : 256;
  for (long J = 16; J <= cap; J *= 2) {
    const double partial = cube_sum(J);
    const double s0 = q * (static_cast<double>(J) + 1.0 - std::sqrt(static_cast<double>(d)) / 2.0) - c0;
    if (s0 <= 0.0) continue;
    const double tail = sphere_area(d) * std::pow(q, -d) * h * std::pow(std::max(1.0, c0), d - 1) *
                        std::pow(1.0 + s0, d - beta) / (beta - d);
    if (tail <= 1e-10 * partial || J * 2 > cap) {
      // At the cap the bounded tail is still added, so the result stays an
      // upper bound; only refuse when it would dominate the estimate.
      if (tail > 1e-4 * partial) {
        throw AnalysisError("lattice bound: series tail " + fmt(tail) + " still above 1e-4 of the partial sum at J=" +
                            std::to_string(J));
      }
      res.series = partial + tail;
      res.tail = tail;
      res.bound = res.prefactor * res.series;
      return res;
    }
  }
  throw AnalysisError("lattice bound: series did not converge within the iteration cap");
}

// ---------------------------------------------------------------------------

namespace {

double max_ratio_to_G(const RadialKernel& k, const GWeight& gw, double spacing) {
  if (k.is_zero()) return 0.0;
  double m = 0.0;
  const auto n = static_cast<std::size_t>(std::ceil(k.cutoff() / spacing));
  for (std::size_t i = 0; i <= n; ++i) {
    const double r = std::min(k.cutoff(), spacing * static_cast<double>(i));
    m = std::max(m, k(r) / gw(r));
  }
  for (double b : k.breakpoints()) m = std::max(m, k(b) / gw(b));
  return m;
}

// max over s >= 0 of s (1 + p + p s) e^{-s}, by dense grid plus golden refinement.
double establishment_lipschitz_peak(double p) {
  double best_s = 0.0, best = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double s = 20.0 * i / 20000.0;
    const double v = s * (1.0 + p + p * s) * std::exp(-s);
    if (v > best) {
      best = v;
      best_s = s;
    }
  }
  // the grid step is 1e-3; pad by the largest possible slope over one step
  const double slope = (1.0 + p + 2.0 * p * (best_s + 1e-3)) + (best_s + 1e-3) * (1.0 + p + p * (best_s + 1e-3));
  return best + slope * 1e-3;
}

}  // namespace

double lipschitz_constant(const BirthModel& m, const Window& w, const GWeight& gw) {
  const double spacing = 1e-3;
  const auto& cst = m.bounds().constants;
  if (auto* f = std::get_if<model::Fecundity>(&m.variant())) {
    (void)f;
    const double B = cst.at("B"), p = cst.at("p");
    LatticeBoundInput lb;
    lb.b_f = [gw](double s) { return gw(s); };
    lb.tail = PowerTail{1.0, gw.dim + gw.eps};
    lb.alpha = 0.5 * cst.at("alpha");
    lb.rho = cst.at("rho");
    lb.dim = w.dim;
    lb.truncate = w.max_distance();
    const double LB = lattice_bound(lb).bound;
    return B * r_p(p) + B * B * (1.0 + p) * C_p(p / (1.0 + p)) * LB;
  }
  if (auto* e = std::get_if<model::Establishment>(&m.variant())) {
    const double p = cst.at("p"), q = cst.at("q");
    const double Ba = max_ratio_to_G(e->a, gw, spacing), Bphi = max_ratio_to_G(e->phi, gw, spacing);
    return Ba * r_p(p) + Bphi * q * establishment_lipschitz_peak(p);
  }
  if (auto* g = std::get_if<model::Glauber>(&m.variant())) return g->z * max_ratio_to_G(g->phi, gw, spacing);
  if (auto* c = std::get_if<model::Contact>(&m.variant())) return max_ratio_to_G(c->g, gw, spacing);
  return 0.0;
}

// ---------------------------------------------------------------------------

CgResult build_cg(const RadialKernel& g, double eps, std::optional<double> C, double grid_spacing) {
  if (!(eps > 0.0)) throw AnalysisError("build_cg needs eps > 0");
  const int d = g.dim();
  CgResult out;
  out.g_mass = g.mass();
  if (out.g_mass >= 1.0) throw AnalysisError("<g> = " + fmt(out.g_mass) + " >= 1: supercritical, no c_g exists");
  if (!g.nonincreasing()) throw AnalysisError("build_cg needs a nonincreasing profile b_g");
  const double b15 = d + 1.5 * eps, b2 = d + 2.0 * eps;

  // envelope b_g(s) <= C (1+s)^{-d-2eps} on the grid
  double c_found = 0.0;
  std::vector<double> nodes;
  if (!g.is_zero()) {
    const auto n = static_cast<std::size_t>(std::ceil(g.cutoff() / grid_spacing));
    for (std::size_t i = 0; i <= n; ++i) nodes.push_back(std::min(g.cutoff(), grid_spacing * static_cast<double>(i)));
    for (double b : g.breakpoints()) nodes.push_back(b);
  }
  for (double s : nodes) c_found = std::max(c_found, g(s) * std::pow(1.0 + s, b2));
  if (C) {
    if (!(*C > 0.0)) throw AnalysisError("build_cg needs C > 0");
    for (double s : nodes) {
      if (g(s) > *C * std::pow(1.0 + s, -b2) * (1.0 + 1e-12)) {
        throw AnalysisError("envelope b_g(s) <= C (1+s)^(-d-2eps) fails at s=" + fmt(s));
      }
    }
    out.C = *C;
  } else {
    out.C = std::max(c_found, 1e-300);
  }

  const double R_C = std::max(0.0, std::pow(out.C, 2.0 / eps) - 1.0);
  const double target = 0.5 * (1.0 - out.g_mass);
  auto tail = [&](double R) { return power_tail(d, b15, R); };
  double R_t = 0.0;
  if (tail(0.0) >= target) {
    double hi = 1.0;
    while (tail(hi) >= target) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (tail(mid) >= target ? lo : hi) = mid;
    }
    R_t = hi;
  }
  out.R = std::max(R_C, R_t);

  if (g.is_zero() || out.R >= g.cutoff()) {
    // b_g vanishes beyond R: the plateau level is 0 and c_g = b_g
    out.R = std::max(out.R, g.is_zero() ? 0.0 : g.cutoff());
    out.plateau = 0.0;
    out.R1 = std::numeric_limits<double>::infinity();
    out.cg = g;
    out.cg_mass = g.mass();
  } else {
    out.plateau = g(out.R);
    out.R1 = std::pow(out.plateau, -1.0 / b15) - 1.0;
    out.R1 = std::max(out.R1, out.R);
    const double R = out.R, R1 = out.R1, plateau = out.plateau;
    const RadialKernel gk = g;
    profile::Custom cg{"c_g",
                       [gk, R, R1, plateau, b15](double s) {
                         if (s <= R) return gk(s);
                         if (s <= R1) return plateau;
                         return std::pow(1.0 + s, -b15);
                       },
                       std::numeric_limits<double>::infinity(),
                       {},
                       true};
    for (double b : g.breakpoints()) {
      if (b < R) cg.breaks.push_back(b);
    }
    cg.breaks.push_back(R);
    cg.breaks.push_back(R1);
    // cut the power-law tail where its mass is negligible against <c_g>
    double cut = std::max(2.0 * R1, 1.0);
    while (tail(cut) > 1e-10) cut *= 2.0;
    out.cg = RadialKernel(std::move(cg), d, KernelOptions{cut, 1e-6});
    out.cg_mass = out.cg.mass() + tail(cut);
  }
  out.tail_bound = tail(out.R);

  for (double s : nodes) {
    if (out.cg(s) < g(s)) throw AnalysisError("c_g < g at s=" + fmt(s));
  }
  if (!(out.cg_mass < 1.0)) throw AnalysisError("<c_g> = " + fmt(out.cg_mass) + " is not below 1");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t good_fft_size(std::size_t n) {
  std::size_t best = std::size_t{1} << 62;
  for (std::size_t p2 = 1; p2 < 2 * n; p2 *= 2)
    for (std::size_t p3 = p2; p3 < 2 * n; p3 *= 3)
      for (std::size_t p5 = p3; p5 < 2 * n; p5 *= 5)
        if (p5 >= n) best = std::min(best, p5);
  return best;
}

// Real linear convolution by FFT with a fixed kernel. Kernel and signal are
// laid out on centered grids of (2K+1)^d and (2M+1)^d points; output on the
// signal grid.
class FftConvolver {
 public:
  FftConvolver(int dim, long M, long K, const std::vector<double>& kernel) : dim_(dim), M_(M) {
    n_ = 2 * M + 1;
    P_ = static_cast<long>(good_fft_size(static_cast<std::size_t>(n_ + K)));
    total_ = dim == 1 ? P_ : P_ * P_;
    complex_ = dim == 1 ? P_ / 2 + 1 : P_ * (P_ / 2 + 1);
    in_ = fftw_alloc_real(static_cast<std::size_t>(total_));
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(complex_));
    kspec_ = fftw_alloc_complex(static_cast<std::size_t>(complex_));
    if (dim == 1) {
      fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(P_), in_, spec_, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(P_), spec_, in_, FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_r2c_2d(static_cast<int>(P_), static_cast<int>(P_), in_, spec_, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_2d(static_cast<int>(P_), static_cast<int>(P_), spec_, in_, FFTW_ESTIMATE);
    }
    // kernel centered at index 0 with wrap-around
    std::fill(in_, in_ + total_, 0.0);
    const long kn = 2 * K + 1;
    auto wrap = [this](long i) { return ((i % P_) + P_) % P_; };
    if (dim == 1) {
      for (long i = 0; i < kn; ++i) in_[wrap(i - K)] = kernel[static_cast<std::size_t>(i)];
    } else {
      for (long i = 0; i < kn; ++i)
        for (long j = 0; j < kn; ++j)
          in_[wrap(i - K) * P_ + wrap(j - K)] = kernel[static_cast<std::size_t>(i * kn + j)];
    }
    fftw_execute(fwd_);
    std::memcpy(kspec_, spec_, sizeof(fftw_complex) * static_cast<std::size_t>(complex_));
  }
  ~FftConvolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(in_);
    fftw_free(spec_);
    fftw_free(kspec_);
  }
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  // out = kernel (*) f, sums without the cell-volume factor.
  void apply(const std::vector<double>& f, std::vector<double>& out) {
    std::fill(in_, in_ + total_, 0.0);
    if (dim_ == 1) {
      std::copy(f.begin(), f.end(), in_);
    } else {
      for (long i = 0; i < n_; ++i)
        std::copy(f.begin() + i * n_, f.begin() + (i + 1) * n_, in_ + i * P_);
    }
    fftw_execute(fwd_);
    for (long k = 0; k < complex_; ++k) {
      const double a = spec_[k][0], b = spec_[k][1];
      const double c = kspec_[k][0], e = kspec_[k][1];
      spec_[k][0] = a * c - b * e;
      spec_[k][1] = a * e + b * c;
    }
    fftw_execute(inv_);
    const double norm = 1.0 / static_cast<double>(total_);
    out.resize(f.size());
    if (dim_ == 1) {
      for (long i = 0; i < n_; ++i) out[i] = in_[i] * norm;
    } else {
      for (long i = 0; i < n_; ++i)
        for (long j = 0; j < n_; ++j) out[i * n_ + j] = in_[i * P_ + j] * norm;
    }
  }

 private:
  int dim_;
  long M_, n_, P_, total_, complex_;
  double* in_;
  fftw_complex* spec_;
  fftw_complex* kspec_;
  fftw_plan fwd_, inv_;
};

struct GridSolve {
  std::vector<double> f, c;
  double residual = 0.0;
  int iterations = 0;
};

// Iterates f <- c + w * conv(f) with conv applied through `conv`, the
// negative round-off of the convolution clamped at zero.
template <class Conv>
GridSolve iterate_fixpoint(const std::vector<double>& c, double w, Conv&& conv, const FixpointOptions& opt) {
  GridSolve s;
  s.c = c;
  s.f = c;
  std::vector<double> cf;
  // Iterate well past the residual target so the iteration error does not
  // show up in the mass balance; stop early once round-off stalls progress.
  const double target = 1e-3 * opt.residual_tol;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    conv(s.f, cf);
    double diff = 0.0;
    for (std::size_t i = 0; i < cf.size(); ++i) {
      const double nv = c[i] + w * std::max(cf[i], 0.0);
      diff = std::max(diff, std::abs(nv - s.f[i]));
      s.f[i] = nv;
    }
    s.iterations = it;
    if (diff < target) break;
    if (diff < best) {
      best = diff;
      stalled = 0;
    } else if (++stalled >= 50) {
      break;
    }
    if (it == opt.max_iterations) throw AnalysisError("fixpoint iteration did not converge");
  }
  conv(s.f, cf);
  for (std::size_t i = 0; i < cf.size(); ++i) {
    s.residual = std::max(s.residual, std::abs(s.f[i] - c[i] - w * std::max(cf[i], 0.0)));
  }
  return s;
}

}  // namespace

double FixpointResult::at(double rr) const {
  if (r.empty() || rr > r.back() || rr < 0.0) return 0.0;
  const double x = rr / spacing;
  const auto i = static_cast<std::size_t>(x);
  if (i + 1 >= f.size()) return f.back();
  const double t = x - static_cast<double>(i);
  return f[i] + t * (f[i + 1] - f[i]);
}

double FixpointResult::mass_balance_error() const {
  const double expected = cg_mass_grid / (1.0 - cg_mass_grid);
  return std::abs(f_mass - expected) / std::max(expected, 1e-300);
}

FixpointResult convolution_fixpoint(const RadialKernel& cg, const FixpointOptions& opt) {
  const int d = cg.dim();
  FixpointResult out;
  out.dim = d;
  out.cg_mass = cg.mass();
  if (!(cg.mass() < 1.0)) throw AnalysisError("<c_g> = " + fmt(cg.mass()) + " >= 1: the Neumann series diverges");
  if (cg.is_zero()) {
    out.spacing = 1.0;
    out.r = {0.0};
    out.f = {0.0};
    out.cg = {0.0};
    return out;
  }
  const double rc = cg.cutoff();
  const double h = opt.spacing > 0.0 ? opt.spacing : rc / (d == 1 ? 256.0 : d == 2 ? 64.0 : 512.0);
  out.spacing = h;
  const long K = static_cast<long>(std::ceil(rc / h));

  for (double D = 8.0 * rc;; D *= 2.0) {
    const long M = static_cast<long>(std::ceil(D / h));
    const long n = 2 * M + 1;
    const double points = d == 2 ? static_cast<double>(n) * static_cast<double>(n) : static_cast<double>(n);
    if (points > static_cast<double>(opt.max_points)) {
      throw AnalysisError("fixpoint grid would exceed " + std::to_string(opt.max_points) +
                          " points before the mass deficit fell below tolerance");
    }
    out.domain = static_cast<double>(M) * h;
    out.r.resize(static_cast<std::size_t>(M) + 1);
    for (long i = 0; i <= M; ++i) out.r[i] = h * static_cast<double>(i);

    if (d == 1 || d == 2) {
      const long kn = 2 * K + 1;
      std::vector<double> kernel(static_cast<std::size_t>(d == 1 ? kn : kn * kn));
      std::vector<double> c(static_cast<std::size_t>(points));
      if (d == 1) {
        for (long i = 0; i < kn; ++i) kernel[i] = cg(std::abs(static_cast<double>(i - K)) * h);
        for (long i = 0; i < n; ++i) c[i] = cg(std::abs(static_cast<double>(i - M)) * h);
      } else {
        for (long i = 0; i < kn; ++i)
          for (long j = 0; j < kn; ++j)
            kernel[i * kn + j] = cg(h * std::hypot(static_cast<double>(i - K), static_cast<double>(j - K)));
        for (long i = 0; i < n; ++i)
          for (long j = 0; j < n; ++j)
            c[i * n + j] = cg(h * std::hypot(static_cast<double>(i - M), static_cast<double>(j - M)));
      }
      const double cell = d == 1 ? h : h * h;
      FftConvolver conv(d, M, K, kernel);
      GridSolve s = iterate_fixpoint(c, cell, [&](const std::vector<double>& f, std::vector<double>& o) {
        conv.apply(f, o);
      }, opt);
      double fm = 0.0, cm = 0.0;
      for (double v : s.f) fm += v;
      for (double v : kernel) cm += v;
      out.f_mass = fm * cell;
      out.cg_mass_grid = cm * cell;
      out.residual = s.residual;
      out.iterations = s.iterations;
      out.f.resize(static_cast<std::size_t>(M) + 1);
      out.cg.resize(static_cast<std::size_t>(M) + 1);
      for (long i = 0; i <= M; ++i) {
        const long idx = d == 1 ? M + i : M * n + (M + i);
        const long mirror = d == 1 ? M - i : M * n + (M - i);
        out.f[i] = 0.5 * (s.f[idx] + s.f[mirror]);
        out.cg[i] = s.c[idx];
      }
    } else {
      // Radial reduction: r (c*f)(r) = int x f(|x|) K(r - x) dx over the line,
      // K(t) = 2 pi int_|t|^inf u c(u) du.
      std::vector<double> cum(static_cast<std::size_t>(K) + 2, 0.0);
      const auto br = cg.breakpoints();
      for (long k = 0; k <= K; ++k) {
        const double a = h * static_cast<double>(k), b = h * static_cast<double>(k + 1);
        double piece = 0.0;
        std::vector<double> knots{a};
        for (double x : br) {
          if (x > a && x < b) knots.push_back(x);
        }
        knots.push_back(b);
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
          piece += gk_integral([&](double u) { return u * cg(u); }, knots[j], knots[j + 1], 1e-10);
        }
        cum[k + 1] = cum[k] + piece;
      }
      const double total = cum[static_cast<std::size_t>(K) + 1];
      const long kn = 2 * K + 1;
      std::vector<double> kernel(static_cast<std::size_t>(kn));
      for (long i = 0; i < kn; ++i) {
        const long a = std::abs(i - K);
        kernel[i] = 2.0 * std::numbers::pi * (total - cum[static_cast<std::size_t>(a)]);
      }
      std::vector<double> c(static_cast<std::size_t>(M) + 1);
      for (long i = 0; i <= M; ++i) c[i] = cg(h * static_cast<double>(i));
      FftConvolver conv(1, M, K, kernel);
      std::vector<double> odd(static_cast<std::size_t>(n)), line;
      const double four_pi_h = 4.0 * std::numbers::pi * h;
      auto radial_conv = [&](const std::vector<double>& f, std::vector<double>& o) {
        for (long i = 0; i < n; ++i) {
          const long j = i - M;
          odd[i] = static_cast<double>(j) * h * f[static_cast<std::size_t>(std::abs(j))];
        }
        conv.apply(odd, line);
        o.resize(f.size());
        for (long i = 1; i <= M; ++i) o[i] = line[M + i] / (static_cast<double>(i) * h);
        // value at the origin: 4 pi int s^2 c(s) f(s) ds on the grid
        double s0 = 0.0;
        for (long i = 1; i <= std::min(M, K); ++i) {
          const double r = h * static_cast<double>(i);
          s0 += r * r * c[i] * f[i];
        }
        o[0] = four_pi_h * s0 / h;
      };
      // the line convolution already carries the factor h
      GridSolve s = iterate_fixpoint(c, h, radial_conv, opt);
      double fm = 0.0, cm = 0.0, km = 0.0;
      for (long i = 1; i <= M; ++i) {
        const double r = h * static_cast<double>(i);
        fm += r * r * s.f[i];
        cm += r * r * c[i];
      }
      for (double v : kernel) km += v;
      out.f_mass = four_pi_h * fm;
      // discrete identity: <f> = C_pts + C_line <f>
      const double c_pts = four_pi_h * cm, c_line = h * km;
      out.cg_mass_grid = c_pts / (1.0 - c_line + c_pts);
      out.residual = s.residual;
      out.iterations = s.iterations;
      out.f = s.f;
      out.cg = s.c;
    }

    out.mass_deficit = out.mass_balance_error();
    if (out.mass_deficit < opt.mass_tol) return out;
  }
}

// ---------------------------------------------------------------------------

SubcriticalReport subcritical_check(const BirthModel& m, double eps, bool run_fixpoint, const FixpointOptions& opt) {
  SubcriticalReport rep;
  const auto& cst = m.bounds().constants;
  if (auto* f = std::get_if<model::Fecundity>(&m.variant())) {
    rep.r_p = r_p(cst.at("p"));
    rep.g = f->a.scaled(rep.r_p);
  } else if (auto* e = std::get_if<model::Establishment>(&m.variant())) {
    rep.r_p = r_p(cst.at("p"));
    rep.g = e->a.scaled(rep.r_p);
  } else if (auto* c = std::get_if<model::Contact>(&m.variant())) {
    rep.g = c->g;
  } else {
    rep.notes.push_back(m.name() + " model has no sublinear envelope g");
    return rep;
  }
  rep.g_mass = rep.g->mass();
  rep.verdict = rep.g_mass < 1.0;
  if (!rep.verdict) {
    rep.notes.push_back("<g> = " + fmt(rep.g_mass) + " >= 1: not subcritical");
    return rep;
  }
  try {
    rep.cg = build_cg(*rep.g, eps);
  } catch (const std::exception& e) {
    rep.notes.push_back(std::string("c_g construction refused: ") + e.what());
    return rep;
  }
  if (run_fixpoint) {
    try {
      rep.fixpoint = convolution_fixpoint(rep.cg->cg, opt);
    } catch (const std::exception& e) {
      rep.notes.push_back(std::string("fixpoint not computed: ") + e.what());
    }
  }
  return rep;
}

SupermartingaleReport supermartingale_audit(const SupermartingaleInput& in, double sigmas) {
  SupermartingaleReport rep;
  const std::size_t n = in.F.size();
  rep.replicates = n;
  if (n == 0) throw AnalysisError("supermartingale audit needs at least one replicate");
  for (std::size_t k = 0; k < in.times.size(); ++k) {
    std::vector<double> lhs(n), rhs(n), diff(n);
    for (std::size_t i = 0; i < n; ++i) {
      lhs[i] = in.F[i][k] + in.integral[i][k];
      rhs[i] = in.F[i][0];
      diff[i] = lhs[i] - rhs[i];
    }
    const Summary sd = summarize(diff);
    SupermartingaleRow row;
    row.t = in.times[k];
    row.lhs = summarize(lhs).mean;
    row.rhs = summarize(rhs).mean;
    row.margin = sigmas * sd.se;
    row.pass = sd.mean <= row.margin + 1e-12 * std::max(1.0, std::abs(row.rhs));
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  std::size_t extinct = 0;
  for (bool e : in.extinct) extinct += e ? 1 : 0;
  rep.extinction_fraction = in.extinct.empty() ? 0.0 : static_cast<double>(extinct) / static_cast<double>(in.extinct.size());
  const auto [lo, hi] = wilson_interval(extinct, in.extinct.size());
  rep.wilson_low = lo;
  rep.wilson_high = hi;
  return rep;
}

}  // namespace bdproc
