#include <doctest.h>

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>

#include "bdproc/analysis.hpp"
#include "bdproc/rng.hpp"

using namespace bdproc;

namespace {

// sup over s >= 0 by Brent's method on [0, 50]; the maximizers are below 3.
double brent_sup(const std::function<double(double)>& f) {
  const auto res = boost::math::tools::brent_find_minima([&](double s) { return -f(s); }, 0.0, 50.0, 52);
  return std::max(-res.second, f(0.0));
}

CertifyOptions opts(int d) {
  CertifyOptions o;
  o.gw = GWeight{1.0, d};
  return o;
}

}  // namespace

TEST_CASE("r_p and C_p closed forms") {
  CHECK(r_p(0.0) == 1.0);
  CHECK(r_p(1.0) == 1.0);
  CHECK(r_p(2.0) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(r_p(2.0) == doctest::Approx(1.213061).epsilon(1e-6));
  CHECK(C_p(0.3) == 1.0);
  CHECK(C_p(1.0) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(r_p(-1.0), AnalysisError);
}

TEST_CASE("r_p, C_p and the establishment peak match numerical maximization") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(0.0, 6.0);
    const double rp = brent_sup([p](double s) { return (1 + p * s) * std::exp(-s); });
    const double cp = brent_sup([p](double s) { return (1 + p * s) * std::exp(-s / 2); });
    const double ep = brent_sup([p](double s) { return s * (1 + p * s) * std::exp(-s); });
    REQUIRE(std::abs(r_p(p) - rp) <= 1e-10);
    REQUIRE(std::abs(C_p(p) - cp) <= 1e-10);
    REQUIRE(std::abs(establishment_peak(p) - ep) <= 1e-10);
    REQUIRE(C_p(p) >= 1.0);
    REQUIRE(r_p(p) >= 1.0);
  }
}

TEST_CASE("lattice bound worked example in d = 1") {
  LatticeBoundInput in;
  in.b_f = [](double s) { return std::pow(1.0 + s, -2.0); };
  in.tail = PowerTail{1.0, 2.0};
  in.alpha = 1.0;
  in.rho = 1.0;
  in.dim = 1;
  const auto res = lattice_bound(in);
  CHECK(res.prefactor == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(res.bound - (1.0 + std::numbers::pi * std::numbers::pi / 3.0)) <= 1e-9);
  CHECK(res.bound == doctest::Approx(4.289868).epsilon(1e-7));

  LatticeBoundInput twice = in;
  twice.b_f = [](double s) { return 2.0 * std::pow(1.0 + s, -2.0); };
  twice.tail = PowerTail{2.0, 2.0};
  CHECK(lattice_bound(twice).bound == doctest::Approx(2.0 * res.bound).epsilon(1e-12));

  double prev = res.bound;
  for (double alpha : {2.0, 4.0, 8.0}) {
    LatticeBoundInput big = in;
    big.alpha = alpha;
    const double b = lattice_bound(big).bound;
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("lattice bound refuses an increasing envelope and a missing tail") {
  LatticeBoundInput in;
  in.b_f = [](double s) { return s; };
  in.support = 2.0;
  CHECK_THROWS_AS(lattice_bound(in), AnalysisError);
  in.b_f = [](double s) { return std::exp(-s); };
  in.support = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(lattice_bound(in), AnalysisError);
}

TEST_CASE("lattice bound holds against random configurations") {
  Rng rng(12);
  for (int d = 1; d <= 2; ++d) {
    const double alpha = 1.0, rho = 0.8;
    LatticeBoundInput in;
    in.b_f = [](double s) { return std::pow(1.0 + s, -5.0); };
    in.tail = PowerTail{1.0, 5.0};
    in.alpha = alpha;
    in.rho = rho;
    in.dim = d;
    const double bound = lattice_bound(in).bound;
    double worst = 0.0;
    for (int trial = 0; trial < 3000; ++trial) {
      const int n = 1 + static_cast<int>(rng.index(200));
      const double spread = rng.uniform(0.5, 6.0);
      std::vector<Vec> pts(static_cast<std::size_t>(n), Vec{0, 0, 0});
      for (auto& p : pts)
        for (int k = 0; k < d; ++k) p[k] = rng.uniform(-spread, spread);
      double sum = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        double energy = 0.0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
          if (j == i) continue;
          Vec dv{0, 0, 0};
          for (int k = 0; k < d; ++k) dv[k] = pts[i][k] - pts[j][k];
          if (norm(dv, d) <= rho) energy += alpha;
        }
        sum += in.b_f(norm(pts[i], d)) * std::exp(-energy);
      }
      worst = std::max(worst, sum);
    }
    CHECK(worst <= bound);
  }
}

TEST_CASE("build_cg for a power-law b_g in d = 1") {
  const double eps = 1.0;
  const RadialKernel g(profile::PowerLaw{0.2, 3.0}, 1);
  const CgResult cg = build_cg(g, eps);
  CHECK(cg.C == doctest::Approx(0.2).epsilon(1e-9));
  // choice of R: the tail integral is below 1 - <g> and C <= (1+R)^{eps/2}
  CHECK(power_tail(1, 1 + 1.5 * eps, cg.R) < 1.0 - cg.g_mass);
  CHECK(cg.C <= std::pow(1.0 + cg.R, eps / 2));
  // continuity at both knots
  CHECK(cg.cg(cg.R) == doctest::Approx(g(cg.R)).epsilon(1e-12));
  CHECK(cg.cg(cg.R1) == doctest::Approx(std::pow(1.0 + cg.R1, -2.5)).epsilon(1e-9));
  CHECK(cg.plateau == doctest::Approx(std::pow(1.0 + cg.R1, -2.5)).epsilon(1e-12));
  // closed-form mass of the three pieces
  const double oracle = 2.0 * (0.1 * (1.0 - std::pow(1.0 + cg.R, -2.0)) + cg.plateau * (cg.R1 - cg.R) +
                               std::pow(1.0 + cg.R1, -1.5) / 1.5);
  CHECK(cg.cg_mass == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(cg.cg_mass < 1.0);
  CHECK(cg.cg_mass >= cg.g_mass);
  for (int i = 0; i <= 20000; ++i) {
    const double s = 0.001 * i;
    REQUIRE(cg.cg(s) >= g(s));
  }
}

TEST_CASE("build_cg refusals") {
  CHECK_THROWS_AS(build_cg(RadialKernel(profile::TopHat{0.6, 1.0}, 1), 1.0), AnalysisError);
  // envelope constant too small for the profile
  CHECK_THROWS_AS(build_cg(RadialKernel(profile::TopHat{0.3, 1.0}, 1), 1.0, 0.1), AnalysisError);
}

TEST_CASE("compact b_g gives c_g = g") {
  const RadialKernel g(profile::TopHat{0.4, 1.0}, 1);
  const CgResult cg = build_cg(g, 1.0);
  CHECK(cg.cg_mass == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(cg.cg(0.5) == 0.4);
  CHECK(cg.cg(1.5) == 0.0);
}

TEST_CASE("fixpoint matches direct Neumann summation") {
  const RadialKernel cg(profile::TopHat{0.25, 1.0}, 1);  // mass 0.5
  const FixpointResult fx = convolution_fixpoint(cg);
  CHECK(fx.residual < 1e-8);
  CHECK(fx.mass_balance_error() < 1e-6);
  CHECK(fx.f_mass == doctest::Approx(1.0).epsilon(1e-2));

  // sum of c^{*n}, n = 1..40, by direct discrete convolution on the same grid
  const double h = fx.spacing;
  const long K = std::lround(1.0 / h);
  const long span = 40 * K;
  std::vector<double> c(2 * K + 1);
  for (long i = -K; i <= K; ++i) c[i + K] = cg(std::abs(static_cast<double>(i)) * h);
  std::vector<double> power(2 * span + 1, 0.0), sum(2 * span + 1, 0.0), next(2 * span + 1);
  for (long i = -K; i <= K; ++i) power[i + span] = c[i + K];
  for (int n = 1; n <= 40; ++n) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += power[i];
    const long reach = std::min<long>(span, static_cast<long>(n + 1) * K);
    std::fill(next.begin(), next.end(), 0.0);
    for (long i = -reach; i <= reach; ++i) {
      double s = 0.0;
      for (long j = -K; j <= K; ++j) {
        const long k = i - j;
        if (k >= -span && k <= span) s += c[j + K] * power[k + span];
      }
      next[i + span] = s * h;
    }
    power.swap(next);
  }
  double worst = 0.0;
  for (long i = 0; i <= 2 * K; ++i) worst = std::max(worst, std::abs(fx.f[i] - sum[i + span]));
  CHECK(worst < 1e-8);
  for (std::size_t i = 0; i < fx.f.size(); ++i) REQUIRE(fx.f[i] >= fx.cg[i] - 1e-15);
}

TEST_CASE("fixpoint refuses <c_g> >= 1") {
  CHECK_THROWS_AS(convolution_fixpoint(RadialKernel(profile::TopHat{0.5, 1.0}, 1)), AnalysisError);
}

TEST_CASE("fixpoint in d = 2 and d = 3") {
  const FixpointResult f2 = convolution_fixpoint(RadialKernel(profile::TopHat{0.5 / std::numbers::pi, 1.0}, 2));
  CHECK(f2.residual < 1e-8);
  CHECK(f2.mass_balance_error() < 1e-6);
  const FixpointResult f3 = convolution_fixpoint(parse_kernel("triangular mass=0.5 radius=1", 3));
  CHECK(f3.residual < 1e-8);
  CHECK(f3.mass_balance_error() < 1e-6);
  CHECK(f3.f_mass == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("subcritical verdicts") {
  Window w(1, 10.0);
  const RadialKernel phi(profile::TopHat{1.0, 1.0}, 1);
  const model::Fecundity hot{RadialKernel(profile::TopHat{0.45, 1.0}, 1), phi, phi.scaled(2.0)};
  const auto r1 = subcritical_check(certify_bounds(hot, w, opts(1)), 1.0);
  CHECK(r1.g_mass == doctest::Approx(0.9 * 2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(r1.g_mass == doctest::Approx(1.0918).epsilon(1e-4));
  CHECK_FALSE(r1.verdict);

  const model::Fecundity cool{RadialKernel(profile::TopHat{0.4, 1.0}, 1), phi, RadialKernel(profile::Zero{}, 1)};
  const auto r2 = subcritical_check(certify_bounds(cool, w, opts(1)), 1.0);
  CHECK(r2.verdict);
  CHECK(r2.r_p == 1.0);
  CHECK(r2.g_mass == doctest::Approx(0.8).epsilon(1e-12));
  REQUIRE(r2.fixpoint);
  CHECK(r2.fixpoint->residual < 1e-8);

  const auto r3 = subcritical_check(certify_bounds(model::Contact{parse_kernel("tophat mass=0.8 radius=1", 1)}, w),
                                    1.0);
  CHECK(r3.verdict);
  CHECK(r3.g_mass == doctest::Approx(0.8).epsilon(1e-12));

  const auto r4 = subcritical_check(certify_bounds(model::Surgailis{1.0}, w), 1.0);
  CHECK_FALSE(r4.verdict);
  CHECK_FALSE(r4.notes.empty());
}

TEST_CASE("supermartingale audit on a pure-death ensemble") {
  // Each particle survives an Exp(1) time; F and the c_g integral are
  // exact functions of the lifetimes.
  Rng rng(31);
  const auto f = [](double r) { return std::exp(-r); };
  const auto cg = [](double r) { return 0.5 * std::exp(-r); };
  SupermartingaleInput in;
  for (int k = 0; k <= 10; ++k) in.times.push_back(0.5 * k);
  const int reps = 4000;
  std::vector<double> f0;
  std::vector<double> ft;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> radii, life;
    for (int i = 0; i < 20; ++i) {
      radii.push_back(rng.uniform(0.0, 3.0));
      life.push_back(rng.exponential());
    }
    std::vector<double> F, I;
    for (double t : in.times) {
      double s = 0.0, integral = 0.0;
      for (std::size_t i = 0; i < radii.size(); ++i) {
        if (life[i] > t) s += f(radii[i]);
        integral += cg(radii[i]) * std::min(life[i], t);
      }
      F.push_back(s);
      I.push_back(integral);
    }
    f0.push_back(F.front());
    ft.push_back(F[2]);
    in.F.push_back(F);
    in.integral.push_back(I);
    in.extinct.push_back(F.back() == 0.0);
  }
  const auto rep = supermartingale_audit(in);
  CHECK(rep.pass);
  CHECK(rep.replicates == static_cast<std::size_t>(reps));
  for (const auto& row : rep.rows) CHECK(row.lhs <= row.rhs + row.margin);
  // E F(eta_t) = e^{-t} E F(eta_0) at t = 1
  double m0 = 0.0, m1 = 0.0;
  for (int i = 0; i < reps; ++i) {
    m0 += f0[i];
    m1 += ft[i];
  }
  CHECK(m1 / m0 == doctest::Approx(std::exp(-1.0)).epsilon(0.03));
  CHECK(rep.wilson_low <= rep.extinction_fraction);
  CHECK(rep.extinction_fraction <= rep.wilson_high);
}

TEST_CASE("supermartingale audit flags growth") {
  SupermartingaleInput in;
  in.times = {0.0, 1.0};
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(1.0, 2.0);
    in.F.push_back({a, 2.0 * a});
    in.integral.push_back({0.0, 0.5});
    in.extinct.push_back(false);
  }
  CHECK_FALSE(supermartingale_audit(in).pass);
}
