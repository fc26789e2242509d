#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bdproc/geometry.hpp"
#include "bdproc/kernels.hpp"

namespace bdproc {

// A birth rate exceeded its certified bound: the certificate is wrong.
class BoundViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace model {
// b(x,eta) = sum_y a(x-y) (1 + sum_{z!=y} c(z-y)) exp(-sum_{z!=y} phi(z-y))
struct Fecundity {
  RadialKernel a, phi, c;
};
// b(x,eta) = (sum_y a(x-y)) (1 + sum_z c(x-z)) exp(-sum_z phi(x-z))
struct Establishment {
  RadialKernel a, phi, c;
};
// b(x,eta) = z exp(-sum_y phi(x-y))
struct Glauber {
  double z = 1.0;
  RadialKernel phi;
};
struct Surgailis {
  double rate = 1.0;
};
// b(x,eta) = sum_y g(x-y)
struct Contact {
  RadialKernel g;
};
}  // namespace model

using ModelVariant =
    std::variant<model::Fecundity, model::Establishment, model::Glauber, model::Surgailis, model::Contact>;

std::string model_name(const ModelVariant& m);

struct CertifyOptions {
  GWeight gw{1.0, 1};
  ConditionGrid grid{};
  // (alpha, rho) used by the lattice bound instead of the detected phi floor.
  std::optional<std::pair<double, double>> phi_floor;
};

struct CertifiedBounds {
  std::optional<double> global;      // sup_{x,eta} b(x,eta)
  std::optional<double> per_parent;  // proposal intensity of one parent
  std::optional<KernelConditionReport> conditions;
  // Every constant that went into the bounds, by name.
  std::map<std::string, double> constants;
  std::vector<std::string> notes;
};

class BirthModel {
 public:
  BirthModel() = default;
  BirthModel(ModelVariant v, CertifiedBounds b) : variant_(std::move(v)), bounds_(std::move(b)) {}

  const ModelVariant& variant() const { return variant_; }
  const CertifiedBounds& bounds() const { return bounds_; }
  std::string name() const { return model_name(variant_); }
  int dim() const;
  bool has_global() const { return bounds_.global.has_value(); }
  double global_bound() const;
  bool has_per_parent() const { return bounds_.per_parent.has_value(); }
  double per_parent_bound() const;

  // Largest kernel cutoff; the cell-list size.
  double interaction_radius() const;

  // b(x, eta). Checked against the global bound when one exists.
  double birth_rate(const Point& x, const Configuration& cfg) const;
  // Same value without the bound check (used by tests and oracles).
  double birth_rate_unchecked(const Point& x, const Configuration& cfg) const;

  // Per-parent thinning: kernel the offspring displacement is drawn from.
  const RadialKernel& dispersal() const;
  // Probability of accepting an offspring of `parent` proposed at x.
  double parent_acceptance(ParticleId parent, const Point& x, const Configuration& cfg) const;

 private:
  ModelVariant variant_ = model::Surgailis{};
  CertifiedBounds bounds_;
};

// sum_{z in cfg, z != exclude} phi(|z - y|)
double local_energy(const Point& y, const Configuration& cfg, const RadialKernel& phi,
                    std::optional<ParticleId> exclude);

// (1 + sum c) exp(-sum phi), sums over cfg without `exclude`.
double fecundity_factor(const Point& y, const Configuration& cfg, const RadialKernel& phi, const RadialKernel& c,
                        std::optional<ParticleId> exclude);

// Builds the certified model; throws CertificationError naming the failing
// inequality when the kernel conditions do not hold.
BirthModel certify_bounds(const ModelVariant& m, const Window& w, const CertifyOptions& opt = {});

}  // namespace bdproc
