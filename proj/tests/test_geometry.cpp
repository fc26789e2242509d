#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bdproc/geometry.hpp"
#include "bdproc/rng.hpp"

using namespace bdproc;

TEST_CASE("min-image displacement") {
  Window w1(1, 10.0);
  CHECK(min_image_displacement({1, 0, 0}, {9, 0, 0}, w1)[0] == doctest::Approx(-2.0));
  CHECK(min_image_displacement({3, 0, 0}, {3, 0, 0}, w1)[0] == 0.0);

  Window w2(2, 10.0);
  const Vec v = min_image_displacement({0, 0, 0}, {9, 4, 0}, w2);
  CHECK(v[0] == doctest::Approx(-1.0));
  CHECK(v[1] == doctest::Approx(4.0));
  CHECK(norm(v, 2) == doctest::Approx(std::sqrt(17.0)));

  Window free1(1, 10.0, Boundary::Free);
  CHECK(min_image_displacement({1, 0, 0}, {9, 0, 0}, free1)[0] == doctest::Approx(8.0));
}

TEST_CASE("min-image length never exceeds sqrt(d) L / 2") {
  Rng rng(5);
  for (int d = 1; d <= 3; ++d) {
    Window w(d, 7.0);
    for (int i = 0; i < 10000; ++i) {
      Point p{0, 0, 0}, q{0, 0, 0};
      for (int k = 0; k < d; ++k) {
        p[k] = rng.uniform(0.0, 7.0);
        q[k] = rng.uniform(0.0, 7.0);
      }
      REQUIRE(distance(p, q, w) <= std::sqrt(static_cast<double>(d)) * 3.5 + 1e-12);
    }
  }
}

TEST_CASE("neighbors_within small examples") {
  Window w(1, 10.0);
  Configuration empty(w, 1.0);
  CHECK(empty.neighbors_within({0, 0, 0}, 3.0).empty());

  Configuration cfg(w, 1.0);
  cfg.insert({0, 0, 0});
  cfg.insert({3, 0, 0});
  CHECK(cfg.neighbors_within({0, 0, 0}, 4.0).size() == 2);
  const auto near = cfg.neighbors_within({0, 0, 0}, 2.0);
  REQUIRE(near.size() == 1);
  CHECK(cfg.position(near[0].id)[0] == 0.0);
}

TEST_CASE("neighbors_within agrees with a brute-force scan") {
  Rng rng(11);
  for (int d = 1; d <= 3; ++d) {
    for (Boundary b : {Boundary::Periodic, Boundary::Free}) {
      Window w(d, 12.0, b);
      for (int trial = 0; trial < 20; ++trial) {
        const double cell = rng.uniform(0.3, 3.0);
        Configuration cfg(w, cell);
        const int n = static_cast<int>(rng.index(300));
        for (int i = 0; i < n; ++i) {
          Point p{0, 0, 0};
          for (int k = 0; k < d; ++k) p[k] = rng.uniform(0.0, 12.0);
          cfg.insert(p);
        }
        Point x{0, 0, 0};
        for (int k = 0; k < d; ++k) x[k] = rng.uniform(0.0, 12.0);
        const double radius = rng.uniform(0.0, 6.0);
        std::set<ParticleId> fast, brute;
        for (const auto& nb : cfg.neighbors_within(x, radius)) fast.insert(nb.id);
        for (std::size_t i = 0; i < cfg.size(); ++i) {
          if (distance(x, cfg.points()[i], w) <= radius) brute.insert(cfg.ids()[i]);
        }
        REQUIRE(fast == brute);
      }
    }
  }
}

TEST_CASE("periodic search radius beyond L/2 is refused") {
  Window w(2, 10.0);
  Configuration cfg(w, 1.0);
  cfg.insert({1, 1, 0});
  CHECK_THROWS_AS(cfg.neighbors_within({0, 0, 0}, 5.5), GeometryError);
}

TEST_CASE("insert and remove round trip") {
  Window w(2, 10.0);
  Configuration cfg(w, 1.0);
  const ParticleId id = cfg.insert({2, 3, 0});
  CHECK(cfg.size() == 1);
  cfg.remove(id);
  CHECK(cfg.size() == 0);
  for (const auto& cell : cfg.cell_signature()) CHECK(cell.empty());
  CHECK_THROWS_AS(cfg.remove(id), IndexCorruption);
}

TEST_CASE("1000 random inserts and removes leave an empty index") {
  Rng rng(3);
  Window w(3, 10.0);
  Configuration cfg(w, 1.3);
  std::vector<ParticleId> ids;
  for (int i = 0; i < 1000; ++i) {
    ids.push_back(cfg.insert({rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)}));
    if (i % 97 == 0) REQUIRE(cfg.cell_signature() == cfg.rebuilt().cell_signature());
  }
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    cfg.remove(ids[i]);
    if (i % 101 == 0) REQUIRE(cfg.cell_signature() == cfg.rebuilt().cell_signature());
  }
  CHECK(cfg.size() == 0);
  for (const auto& cell : cfg.cell_signature()) CHECK(cell.empty());
}

TEST_CASE("canonical wraps periodic coordinates only") {
  Window w(2, 10.0);
  const Point p = w.canonical({-1.0, 12.5, 0.0});
  CHECK(p[0] == doctest::Approx(9.0));
  CHECK(p[1] == doctest::Approx(2.5));
  Window f(2, 10.0, Boundary::Free);
  CHECK(f.canonical({-1.0, 12.5, 0.0})[0] == -1.0);
  CHECK_FALSE(f.contains({-1.0, 1.0, 0.0}));
}
