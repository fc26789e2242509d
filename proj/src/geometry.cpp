#include "bdproc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace bdproc {

std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "free"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "free") return Boundary::Free;
  throw GeometryError("unknown boundary '" + s + "' (expected periodic|free)");
}

Window::Window(int d, double l, Boundary b) : dim(d), side(l), boundary(b) {
  if (d < 1 || d > 3) throw GeometryError("window dimension must be 1, 2 or 3");
  if (!(l > 0.0) || !std::isfinite(l)) throw GeometryError("window side must be positive");
}

double Window::volume() const { return std::pow(side, dim); }

double Window::max_distance() const {
  const double per_axis = boundary == Boundary::Periodic ? 0.5 * side : side;
  return std::sqrt(static_cast<double>(dim)) * per_axis;
}

Point Window::center() const {
  Point c{0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) c[k] = 0.5 * side;
  return c;
}

bool Window::contains(const Point& p) const {
  for (int k = 0; k < dim; ++k) {
    if (!(p[k] >= 0.0 && p[k] < side)) return false;
  }
  return true;
}

Point Window::canonical(Point p) const {
  if (boundary == Boundary::Free) return p;
  for (int k = 0; k < dim; ++k) {
    double v = p[k] - side * std::floor(p[k] / side);
    // floor() can leave v == side for tiny negative inputs
    if (v >= side) v -= side;
    if (v < 0.0) v = 0.0;
    p[k] = v;
  }
  for (int k = dim; k < 3; ++k) p[k] = 0.0;
  return p;
}

// ---------------------------------------------------------------------------

Configuration::Configuration(const Window& w, double cell_size) : window_(w), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) cell_size_ = w.side;
  n_ = std::max(1, static_cast<int>(std::floor(w.side / cell_size_)));
  // keep the grid bounded for very short kernels
  const int cap = w.dim == 1 ? 1 << 16 : (w.dim == 2 ? 512 : 96);
  n_ = std::min(n_, cap);
  width_ = w.side / n_;
  std::size_t total = 1;
  for (int k = 0; k < w.dim; ++k) total *= static_cast<std::size_t>(n_);
  cells_.resize(total);
}

std::size_t Configuration::cell_of(const Point& p) const {
  std::size_t idx = 0;
  for (int k = 0; k < window_.dim; ++k) {
    int c = static_cast<int>(p[k] / width_);
    c = std::clamp(c, 0, n_ - 1);
    idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(c);
  }
  return idx;
}

void Configuration::check_radius(double radius) const {
  if (window_.boundary == Boundary::Periodic && radius > window_.half()) {
    throw GeometryError("search radius exceeds half the periodic window side");
  }
}

void Configuration::add_to_cell(std::size_t cell, std::uint32_t slot) { cells_[cell].push_back(slot); }

void Configuration::remove_from_cell(std::size_t cell, std::uint32_t slot) {
  auto& list = cells_[cell];
  auto it = std::find(list.begin(), list.end(), slot);
  if (it == list.end()) throw IndexCorruption("particle missing from its cell list");
  *it = list.back();
  list.pop_back();
}

ParticleId Configuration::insert(const Point& p) {
  const ParticleId id = next_id_;
  insert_with_id(id, p);
  return id;
}

void Configuration::insert_with_id(ParticleId id, const Point& p) {
  if (!window_.contains(p)) throw GeometryError("point outside the window");
  if (slot_.count(id)) throw IndexCorruption("duplicate particle id " + std::to_string(id));
  const auto slot = static_cast<std::uint32_t>(points_.size());
  Point q = p;
  for (int k = window_.dim; k < 3; ++k) q[k] = 0.0;
  points_.push_back(q);
  ids_.push_back(id);
  const std::size_t cell = cell_of(q);
  cell_index_.push_back(static_cast<std::uint32_t>(cell));
  add_to_cell(cell, slot);
  slot_.emplace(id, slot);
  next_id_ = std::max(next_id_, id + 1);
}

void Configuration::remove(ParticleId id) {
  auto it = slot_.find(id);
  if (it == slot_.end()) throw IndexCorruption("remove of dead particle id " + std::to_string(id));
  const std::uint32_t slot = it->second;
  const auto last = static_cast<std::uint32_t>(points_.size() - 1);
  remove_from_cell(cell_index_[slot], slot);
  slot_.erase(it);
  if (slot != last) {
    // move the last particle into the freed slot and patch its cell entry
    auto& list = cells_[cell_index_[last]];
    *std::find(list.begin(), list.end(), last) = slot;
    points_[slot] = points_[last];
    ids_[slot] = ids_[last];
    cell_index_[slot] = cell_index_[last];
    slot_[ids_[slot]] = slot;
  }
  points_.pop_back();
  ids_.pop_back();
  cell_index_.pop_back();
}

const Point& Configuration::position(ParticleId id) const {
  auto it = slot_.find(id);
  if (it == slot_.end()) throw IndexCorruption("unknown particle id " + std::to_string(id));
  return points_[it->second];
}

std::vector<Neighbor> Configuration::neighbors_within(const Point& x, double radius,
                                                      std::optional<ParticleId> exclude) const {
  check_radius(radius);
  std::vector<Neighbor> out;
  for_each_within(
      x, radius, [&](ParticleId id, const Vec& dv, double r) { out.push_back({id, dv, r}); }, exclude);
  return out;
}

std::vector<std::vector<ParticleId>> Configuration::cell_signature() const {
  std::vector<std::vector<ParticleId>> sig(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (auto s : cells_[c]) sig[c].push_back(ids_[s]);
    std::sort(sig[c].begin(), sig[c].end());
  }
  return sig;
}

Configuration Configuration::rebuilt() const {
  Configuration fresh(window_, cell_size_);
  for (std::size_t i = 0; i < points_.size(); ++i) fresh.insert_with_id(ids_[i], points_[i]);
  return fresh;
}

}  // namespace bdproc
