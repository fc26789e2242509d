#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bdproc/analysis.hpp"
#include "bdproc/rates.hpp"
#include "bdproc/rng.hpp"

using namespace bdproc;

namespace {

// Direct double loop over every particle pair with min-image distances.
double fecundity_oracle(const Point& x, const std::vector<Point>& pts, const model::Fecundity& m, const Window& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double av = m.a(distance(x, pts[i], w));
    if (av == 0.0) continue;
    double sc = 0.0, sphi = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const double r = distance(pts[i], pts[j], w);
      sc += m.c(r);
      sphi += m.phi(r);
    }
    total += av * (1.0 + sc) * std::exp(-sphi);
  }
  return total;
}

double establishment_oracle(const Point& x, const std::vector<Point>& pts, const model::Establishment& m,
                            const Window& w) {
  double sa = 0.0, sc = 0.0, sphi = 0.0;
  for (const Point& y : pts) {
    const double r = distance(x, y, w);
    sa += m.a(r);
    sc += m.c(r);
    sphi += m.phi(r);
  }
  return sa * (1.0 + sc) * std::exp(-sphi);
}

CertifyOptions opts(int d) {
  CertifyOptions o;
  o.gw = GWeight{1.0, d};
  return o;
}

Point random_point(Rng& rng, const Window& w) {
  Point p{0, 0, 0};
  for (int k = 0; k < w.dim; ++k) p[k] = rng.uniform(0.0, w.side);
  return p;
}

model::Fecundity demo_fecundity(int d) {
  return model::Fecundity{RadialKernel(profile::TopHat{0.1, 1.0}, d), RadialKernel(profile::TopHat{1.0, 1.0}, d),
                          RadialKernel(profile::TopHat{2.0, 1.0}, d)};
}

}  // namespace

TEST_CASE("local_energy") {
  Window w(1, 10.0);
  const RadialKernel phi(profile::Triangular{1.0, 2.0}, 1);  // phi(1) = 0.5
  Configuration cfg(w, 2.0);
  const ParticleId a = cfg.insert({2, 0, 0});
  CHECK(local_energy({2, 0, 0}, cfg, phi, a) == 0.0);
  cfg.insert({3, 0, 0});
  CHECK(local_energy({2, 0, 0}, cfg, phi, a) == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(1);
  Window w2(2, 8.0);
  Configuration c2(w2, 2.0);
  std::vector<Point> pts;
  for (int i = 0; i < 5; ++i) {
    pts.push_back(random_point(rng, w2));
    c2.insert(pts.back());
  }
  const RadialKernel phi2(profile::Gaussian{1.0, 0.5}, 2, KernelOptions{3.0});
  const Point y = random_point(rng, w2);
  double brute = 0.0;
  for (const Point& p : pts) brute += phi2(distance(y, p, w2));
  CHECK(std::abs(local_energy(y, c2, phi2, std::nullopt) - brute) <= 1e-12);
}

TEST_CASE("fecundity_factor") {
  Window w(1, 10.0);
  const RadialKernel phi(profile::TopHat{0.5, 1.0}, 1);
  const RadialKernel c(profile::TopHat{1.0, 1.0}, 1);  // c = 2 phi
  Configuration cfg(w, 1.0);
  const ParticleId y = cfg.insert({5, 0, 0});
  CHECK(fecundity_factor({5, 0, 0}, cfg, phi, c, y) == 1.0);
  cfg.insert({5.5, 0, 0});
  CHECK(fecundity_factor({5, 0, 0}, cfg, phi, c, y) ==
        doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(2.0 * std::exp(-0.5) == doctest::Approx(1.21306).epsilon(1e-5));
}

TEST_CASE("birth rates on empty and singleton states") {
  Window w(2, 10.0);
  Configuration empty(w, 1.0);
  const auto fec = certify_bounds(demo_fecundity(2), w, opts(2));
  CHECK(fec.birth_rate({1, 1, 0}, empty) == 0.0);
  const auto sur = certify_bounds(model::Surgailis{0.5}, w);
  CHECK(sur.birth_rate({1, 1, 0}, empty) == 0.5);
  const auto gl = certify_bounds(model::Glauber{2.0, RadialKernel(profile::TopHat{1.0, 1.0}, 2)}, w);
  CHECK(gl.birth_rate({1, 1, 0}, empty) == 2.0);

  const RadialKernel g(profile::Triangular{1.0, 2.0}, 2);
  const auto con = certify_bounds(model::Contact{g}, w);
  CHECK(con.birth_rate({1, 1, 0}, empty) == 0.0);
  Configuration one(w, 2.0);
  one.insert({9.5, 1, 0});  // wraps to distance 1.5
  CHECK(con.birth_rate({1, 1, 0}, one) == doctest::Approx(g(1.5)).epsilon(1e-14));
}

TEST_CASE("birth rates match brute-force oracles") {
  Rng rng(7);
  for (int d = 1; d <= 3; ++d) {
    Window w(d, 6.0);
    const auto fm = demo_fecundity(d);
    const auto fec = certify_bounds(fm, w, opts(d));
    const model::Establishment em{RadialKernel(profile::TopHat{0.5, 1.0}, d),
                                  RadialKernel(profile::TopHat{1.0, 1.5}, d),
                                  RadialKernel(profile::Triangular{1.0, 1.0}, d)};
    const auto est = certify_bounds(em, w, opts(d));
    for (int trial = 0; trial < 50; ++trial) {
      Configuration cfg(w, 1.5);
      std::vector<Point> pts;
      const int n = 6 + static_cast<int>(rng.index(10));
      for (int i = 0; i < n; ++i) {
        pts.push_back(random_point(rng, w));
        cfg.insert(pts.back());
      }
      const Point x = random_point(rng, w);
      REQUIRE(std::abs(fec.birth_rate(x, cfg) - fecundity_oracle(x, pts, fm, w)) <= 1e-12);
      REQUIRE(std::abs(est.birth_rate(x, cfg) - establishment_oracle(x, pts, em, w)) <= 1e-12);
    }
  }
}

TEST_CASE("trivial certificates") {
  Window w(2, 10.0);
  const auto s = certify_bounds(model::Surgailis{0.5}, w);
  CHECK(s.global_bound() == 0.5);
  CHECK_FALSE(s.has_per_parent());
  const auto g = certify_bounds(model::Glauber{2.0, RadialKernel(profile::Gaussian{3.0, 0.3}, 2)}, w);
  CHECK(g.global_bound() == 2.0);
  const auto c = certify_bounds(model::Contact{RadialKernel(profile::TopHat{0.2, 1.0}, 2)}, w);
  CHECK_FALSE(c.has_global());
  CHECK(c.per_parent_bound() == doctest::Approx(0.2 * std::numbers::pi).epsilon(1e-10));
}

TEST_CASE("fecundity certificate composes C_p with the lattice bound") {
  // b_f(s) = B (1+s)^{-2}, phi floor 2 on radius 1 so the lattice bound sees alpha = 1, rho = 1.
  const double B = 0.3;
  Window w(1, 200.0);
  const model::Fecundity m{RadialKernel(profile::PowerLaw{B, 2.0}, 1, KernelOptions{99.0}),
                           RadialKernel(profile::TopHat{2.0, 1.0}, 1), RadialKernel(profile::TopHat{1.0, 1.0}, 1)};
  const auto bm = certify_bounds(m, w, opts(1));
  const double p = bm.bounds().constants.at("p");
  CHECK(p == doctest::Approx(0.5));
  CHECK(C_p(p) == 1.0);

  // closed-form series: terms with (|j| - 1) v 0 <= 99
  double series = 1.0;
  for (int k = 1; k <= 100; ++k) series += 2.0 / (static_cast<double>(k) * k);
  CHECK(bm.global_bound() == doctest::Approx(B * series).epsilon(1e-12));
  const double infinite = B * (1.0 + std::numbers::pi * std::numbers::pi / 3.0);
  CHECK(bm.global_bound() <= infinite);
  CHECK(bm.global_bound() >= infinite - 2.0 * B / 100.0);
  CHECK(bm.per_parent_bound() == doctest::Approx(m.a.mass() * r_p(p)));

  // With p = 2 the same kernels carry the C_p factor.
  const model::Fecundity m2{m.a, m.phi, RadialKernel(profile::TopHat{4.0, 1.0}, 1)};
  const auto bm2 = certify_bounds(m2, w, opts(1));
  CHECK(bm2.global_bound() == doctest::Approx(C_p(2.0) * B * series).epsilon(1e-12));
}

TEST_CASE("certification refuses broken conditions") {
  Window w(1, 10.0);
  const RadialKernel phi(profile::TopHat{1.0, 1.0}, 1);
  // c reaches beyond phi
  const model::Fecundity bad_c{phi, phi, RadialKernel(profile::TopHat{1.0, 2.0}, 1)};
  CHECK_THROWS_AS(certify_bounds(bad_c, w, opts(1)), CertificationError);
  // phi without a floor at the origin
  const model::Fecundity no_floor{phi, RadialKernel(profile::Zero{}, 1), RadialKernel(profile::Zero{}, 1)};
  CHECK_THROWS_AS(certify_bounds(no_floor, w, opts(1)), CertificationError);
  // kernel longer than half the torus
  const model::Contact wide{RadialKernel(profile::TopHat{0.01, 6.0}, 1)};
  CHECK_THROWS_AS(certify_bounds(wide, w), CertificationError);
}

TEST_CASE("adversarial search stays below the certified bound") {
  Rng rng(2024);
  Window w(2, 8.0);
  const auto fm = demo_fecundity(2);
  const auto bm = certify_bounds(fm, w, opts(2));
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    Configuration cfg(w, 1.0);
    const Point x = random_point(rng, w);
    const int n = static_cast<int>(rng.index(60));
    const double spread = rng.uniform(0.2, 2.0);
    for (int i = 0; i < n; ++i) {
      Point p = x;
      for (int k = 0; k < 2; ++k) p[k] += rng.uniform(-spread, spread);
      cfg.insert(w.canonical(p));
    }
    worst = std::max(worst, bm.birth_rate_unchecked(x, cfg));
  }
  CHECK(worst <= bm.global_bound());
  CHECK(worst > 0.0);
}

TEST_CASE("per-parent acceptance of an isolated parent is 1 / r_p") {
  Window w(1, 10.0);
  const RadialKernel phi(profile::TopHat{1.0, 1.0}, 1);
  for (double p : {0.5, 1.0, 2.0, 3.0}) {
    const model::Fecundity m{RadialKernel(profile::TopHat{0.2, 1.0}, 1), phi, phi.scaled(p)};
    const auto bm = certify_bounds(m, w, opts(1));
    Configuration cfg(w, 1.0);
    const ParticleId id = cfg.insert({5, 0, 0});
    CHECK(bm.parent_acceptance(id, {5.5, 0, 0}, cfg) == doctest::Approx(1.0 / r_p(p)).epsilon(1e-12));
  }
  const auto con = certify_bounds(model::Contact{RadialKernel(profile::TopHat{0.4, 1.0}, 1)}, w);
  Configuration cfg(w, 1.0);
  const ParticleId id = cfg.insert({5, 0, 0});
  cfg.insert({5.2, 0, 0});
  CHECK(con.parent_acceptance(id, {5.5, 0, 0}, cfg) == 1.0);
}

TEST_CASE("birth rates are local") {
  Rng rng(5);
  Window w(2, 12.0);
  const auto bm = certify_bounds(demo_fecundity(2), w, opts(2));
  const double reach = 2.0 * bm.interaction_radius();
  for (int trial = 0; trial < 200; ++trial) {
    Configuration cfg(w, 1.0);
    for (int i = 0; i < 30; ++i) cfg.insert(random_point(rng, w));
    const Point x = random_point(rng, w);
    const double before = bm.birth_rate(x, cfg);
    Point far = random_point(rng, w);
    if (distance(x, far, w) <= reach + 1e-9) continue;
    cfg.insert(far);
    REQUIRE(bm.birth_rate(x, cfg) == doctest::Approx(before).epsilon(1e-14));
  }
}

TEST_CASE("adding a particle changes b by at most M G") {
  Rng rng(6);
  Window w(1, 20.0);
  const GWeight gw{1.0, 1};
  std::vector<BirthModel> models;
  models.push_back(certify_bounds(demo_fecundity(1), w, opts(gw.dim)));
  models.push_back(certify_bounds(
      model::Establishment{RadialKernel(profile::TopHat{0.5, 1.0}, 1), RadialKernel(profile::TopHat{1.0, 1.0}, 1),
                           RadialKernel(profile::TopHat{1.5, 1.0}, 1)},
      w, opts(gw.dim)));
  models.push_back(certify_bounds(model::Glauber{1.5, RadialKernel(profile::Triangular{2.0, 1.5}, 1)}, w, opts(gw.dim)));
  models.push_back(certify_bounds(model::Contact{RadialKernel(profile::TopHat{0.4, 1.0}, 1)}, w, opts(gw.dim)));
  for (const auto& bm : models) {
    const double M = lipschitz_constant(bm, w, gw);
    for (int trial = 0; trial < 500; ++trial) {
      Configuration cfg(w, 1.5);
      const Point x = random_point(rng, w);
      const int n = static_cast<int>(rng.index(20));
      for (int i = 0; i < n; ++i) cfg.insert(w.canonical({x[0] + rng.uniform(-3, 3), 0, 0}));
      const Point extra = w.canonical({x[0] + rng.uniform(-3, 3), 0, 0});
      const double before = bm.birth_rate_unchecked(x, cfg);
      cfg.insert(extra);
      const double after = bm.birth_rate_unchecked(x, cfg);
      REQUIRE(std::abs(after - before) <= M * gw(distance(x, extra, w)) * (1 + 1e-12));
    }
  }
}
