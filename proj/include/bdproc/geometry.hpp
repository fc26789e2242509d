#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bdproc {

using ParticleId = std::uint64_t;

// Coordinates beyond `dim` are kept at zero so the same storage serves d = 1..3.
using Point = std::array<double, 3>;
using Vec = std::array<double, 3>;

enum class Boundary { Periodic, Free };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when the configuration index is asked to do something that can only
// happen if the event bookkeeping is broken (e.g. removing a dead particle).
class IndexCorruption : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Window {
  int dim = 2;
  double side = 10.0;
  Boundary boundary = Boundary::Periodic;

  Window() = default;
  Window(int d, double l, Boundary b = Boundary::Periodic);

  double volume() const;
  double half() const { return 0.5 * side; }
  // Largest distance two points of the window can have (min-image under Periodic).
  double max_distance() const;
  Point center() const;
  bool contains(const Point& p) const;
  // Wraps into [0, L) under Periodic; under Free returns p unchanged.
  Point canonical(Point p) const;
};

// Shortest displacement q - p. Components lie in [-L/2, L/2) under Periodic.
inline Vec min_image_displacement(const Point& p, const Point& q, const Window& w) {
  Vec out{0.0, 0.0, 0.0};
  const double l = w.side;
  const double h = 0.5 * l;
  for (int k = 0; k < w.dim; ++k) {
    double dv = q[k] - p[k];
    if (w.boundary == Boundary::Periodic) {
      if (dv >= h) {
        dv -= l;
      } else if (dv < -h) {
        dv += l;
      }
    }
    out[k] = dv;
  }
  return out;
}

inline double norm(const Vec& v, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

inline double distance(const Point& p, const Point& q, const Window& w) {
  return norm(min_image_displacement(p, q, w), w.dim);
}

struct Neighbor {
  ParticleId id;
  Vec displacement;  // particle position minus query point
  double distance;
};

// A point set in a window, indexed by a uniform cell grid whose cell width is
// at least `cell_size`. Particles are stored densely; ids are stable handles.
class Configuration {
 public:
  Configuration(const Window& w, double cell_size);

  const Window& window() const { return window_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  ParticleId insert(const Point& p);
  // Insert under a caller-chosen id (shared atom ids in coupled runs).
  void insert_with_id(ParticleId id, const Point& p);
  void remove(ParticleId id);
  bool contains(ParticleId id) const { return slot_.count(id) != 0; }
  const Point& position(ParticleId id) const;

  // Dense views, valid until the next insert/remove.
  const std::vector<Point>& points() const { return points_; }
  const std::vector<ParticleId>& ids() const { return ids_; }

  // Calls fn(id, displacement, distance) for every particle within `radius`
  // of x (min-image), skipping `exclude` when given.
  template <typename Fn>
  void for_each_within(const Point& x, double radius, Fn&& fn,
                       std::optional<ParticleId> exclude = std::nullopt) const;

  std::vector<Neighbor> neighbors_within(const Point& x, double radius,
                                         std::optional<ParticleId> exclude = std::nullopt) const;

  // Cell occupancy as sorted id lists, for comparing against a rebuilt index.
  std::vector<std::vector<ParticleId>> cell_signature() const;
  Configuration rebuilt() const;

  int cells_per_axis() const { return n_; }
  double cell_width() const { return width_; }
  ParticleId next_id() const { return next_id_; }

 private:
  std::size_t cell_of(const Point& p) const;
  void check_radius(double radius) const;
  void add_to_cell(std::size_t cell, std::uint32_t slot);
  void remove_from_cell(std::size_t cell, std::uint32_t slot);

  Window window_;
  double cell_size_;
  int n_ = 1;
  double width_ = 0.0;
  std::vector<Point> points_;
  std::vector<ParticleId> ids_;
  std::vector<std::uint32_t> cell_index_;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::unordered_map<ParticleId, std::uint32_t> slot_;
  ParticleId next_id_ = 0;
};

// ---------------------------------------------------------------------------

template <typename Fn>
void Configuration::for_each_within(const Point& x, double radius, Fn&& fn,
                                    std::optional<ParticleId> exclude) const {
  if (points_.empty()) return;
  check_radius(radius);
  const int d = window_.dim;
  const bool periodic = window_.boundary == Boundary::Periodic;
  const double r2 = radius * radius;

  std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
  const int shells = static_cast<int>(std::ceil(radius / width_));
  const bool whole = 2 * shells + 1 >= n_;
  for (int k = 0; k < d; ++k) {
    int c = static_cast<int>(x[k] / width_);
    if (c >= n_) c = n_ - 1;
    if (c < 0) c = 0;
    if (whole) {
      lo[k] = 0;
      hi[k] = n_ - 1;
    } else if (periodic) {
      lo[k] = c - shells;
      hi[k] = c + shells;
    } else {
      lo[k] = std::max(0, c - shells);
      hi[k] = std::min(n_ - 1, c + shells);
    }
  }

  auto wrap = [this](int i) { return ((i % n_) + n_) % n_; };
  auto visit_cell = [&](std::size_t cell) {
    for (std::uint32_t s : cells_[cell]) {
      if (exclude && ids_[s] == *exclude) continue;
      const Vec dv = min_image_displacement(x, points_[s], window_);
      double q = 0.0;
      for (int k = 0; k < d; ++k) q += dv[k] * dv[k];
      if (q <= r2) fn(ids_[s], dv, std::sqrt(q));
    }
  };

  for (int i = lo[0]; i <= hi[0]; ++i) {
    const std::size_t ci = static_cast<std::size_t>(wrap(i));
    if (d == 1) {
      visit_cell(ci);
      continue;
    }
    for (int j = lo[1]; j <= hi[1]; ++j) {
      const std::size_t cj = ci * n_ + static_cast<std::size_t>(wrap(j));
      if (d == 2) {
        visit_cell(cj);
        continue;
      }
      for (int k = lo[2]; k <= hi[2]; ++k) {
        visit_cell(cj * n_ + static_cast<std::size_t>(wrap(k)));
      }
    }
  }
}

}  // namespace bdproc
