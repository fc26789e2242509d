#include "bdproc/rates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bdproc/analysis.hpp"

namespace bdproc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kBoundSlack = 1e-9;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string model_name(const ModelVariant& m) {
  return std::visit(overloaded{
                        [](const model::Fecundity&) { return std::string("fecundity"); },
                        [](const model::Establishment&) { return std::string("establishment"); },
                        [](const model::Glauber&) { return std::string("glauber"); },
                        [](const model::Surgailis&) { return std::string("surgailis"); },
                        [](const model::Contact&) { return std::string("contact"); },
                    },
                    m);
}

double local_energy(const Point& y, const Configuration& cfg, const RadialKernel& phi,
                    std::optional<ParticleId> exclude) {
  if (phi.is_zero()) return 0.0;
  double s = 0.0;
  cfg.for_each_within(
      y, phi.cutoff(), [&](ParticleId, const Vec&, double r) { s += phi(r); }, exclude);
  return s;
}

double fecundity_factor(const Point& y, const Configuration& cfg, const RadialKernel& phi, const RadialKernel& c,
                        std::optional<ParticleId> exclude) {
  const double radius = std::max(phi.is_zero() ? 0.0 : phi.cutoff(), c.is_zero() ? 0.0 : c.cutoff());
  if (radius <= 0.0) return 1.0;
  double sc = 0.0, sphi = 0.0;
  cfg.for_each_within(
      y, radius,
      [&](ParticleId, const Vec&, double r) {
        sc += c(r);
        sphi += phi(r);
      },
      exclude);
  return (1.0 + sc) * std::exp(-sphi);
}

// ---------------------------------------------------------------------------

int BirthModel::dim() const {
  return std::visit(overloaded{
                        [](const model::Fecundity& m) { return m.a.dim(); },
                        [](const model::Establishment& m) { return m.a.dim(); },
                        [](const model::Glauber& m) { return m.phi.dim(); },
                        [](const model::Surgailis&) { return 0; },
                        [](const model::Contact& m) { return m.g.dim(); },
                    },
                    variant_);
}

double BirthModel::global_bound() const {
  if (!bounds_.global) throw CertificationError(name() + " model has no certified global birth-rate bound");
  return *bounds_.global;
}

double BirthModel::per_parent_bound() const {
  if (!bounds_.per_parent) throw CertificationError(name() + " model has no per-parent proposal intensity");
  return *bounds_.per_parent;
}

double BirthModel::interaction_radius() const {
  auto cut = [](const RadialKernel& k) { return k.is_zero() ? 0.0 : k.cutoff(); };
  return std::visit(overloaded{
                        [&](const model::Fecundity& m) { return std::max({cut(m.a), cut(m.phi), cut(m.c)}); },
                        [&](const model::Establishment& m) { return std::max({cut(m.a), cut(m.phi), cut(m.c)}); },
                        [&](const model::Glauber& m) { return cut(m.phi); },
                        [](const model::Surgailis&) { return 0.0; },
                        [&](const model::Contact& m) { return cut(m.g); },
                    },
                    variant_);
}

double BirthModel::birth_rate_unchecked(const Point& x, const Configuration& cfg) const {
  return std::visit(
      overloaded{
          [&](const model::Fecundity& m) {
            if (m.a.is_zero()) return 0.0;
            double s = 0.0;
            cfg.for_each_within(x, m.a.cutoff(), [&](ParticleId id, const Vec&, double r) {
              const double av = m.a(r);
              if (av > 0.0) s += av * fecundity_factor(cfg.position(id), cfg, m.phi, m.c, id);
            });
            return s;
          },
          [&](const model::Establishment& m) {
            if (m.a.is_zero()) return 0.0;
            double sa = 0.0;
            cfg.for_each_within(x, m.a.cutoff(), [&](ParticleId, const Vec&, double r) { sa += m.a(r); });
            if (sa == 0.0) return 0.0;
            return sa * fecundity_factor(x, cfg, m.phi, m.c, std::nullopt);
          },
          [&](const model::Glauber& m) { return m.z * std::exp(-local_energy(x, cfg, m.phi, std::nullopt)); },
          [](const model::Surgailis& m) { return m.rate; },
          [&](const model::Contact& m) { return local_energy(x, cfg, m.g, std::nullopt); },
      },
      variant_);
}

double BirthModel::birth_rate(const Point& x, const Configuration& cfg) const {
  const double b = birth_rate_unchecked(x, cfg);
  if (bounds_.global && b > *bounds_.global * (1.0 + kBoundSlack)) {
    throw BoundViolation("birth rate " + fmt(b) + " exceeds the certified bound " + fmt(*bounds_.global) + " (" +
                         name() + " model, " + std::to_string(cfg.size()) + " particles)");
  }
  return b;
}

const RadialKernel& BirthModel::dispersal() const {
  if (auto* f = std::get_if<model::Fecundity>(&variant_)) return f->a;
  if (auto* e = std::get_if<model::Establishment>(&variant_)) return e->a;
  if (auto* c = std::get_if<model::Contact>(&variant_)) return c->g;
  throw CertificationError(name() + " model has no per-parent decomposition");
}

double BirthModel::parent_acceptance(ParticleId parent, const Point& x, const Configuration& cfg) const {
  double acc = 1.0;
  if (auto* f = std::get_if<model::Fecundity>(&variant_)) {
    acc = fecundity_factor(cfg.position(parent), cfg, f->phi, f->c, parent) / bounds_.constants.at("r_p");
  } else if (auto* e = std::get_if<model::Establishment>(&variant_)) {
    acc = fecundity_factor(x, cfg, e->phi, e->c, std::nullopt) / bounds_.constants.at("r_p");
  } else if (!std::holds_alternative<model::Contact>(variant_)) {
    throw CertificationError(name() + " model has no per-parent decomposition");
  }
  if (acc > 1.0 + kBoundSlack) {
    throw BoundViolation("per-parent acceptance probability " + fmt(acc) + " exceeds 1 (" + name() + " model)");
  }
  return acc;
}

// ---------------------------------------------------------------------------

namespace {

void check_kernel(const RadialKernel& k, const char* what, const Window& w) {
  if (k.dim() != w.dim) {
    throw CertificationError(std::string("kernel ") + what + " is defined for d=" + std::to_string(k.dim()) +
                             " but the window has d=" + std::to_string(w.dim));
  }
  if (w.boundary == Boundary::Periodic && !k.is_zero() && k.cutoff() > w.half()) {
    throw CertificationError(std::string("kernel ") + what + " cutoff " + fmt(k.cutoff()) +
                             " exceeds half the periodic window side " + fmt(w.half()));
  }
}

// Picks the floor (alpha, rho) for the lattice bound, validating overrides.
std::pair<double, double> phi_floor(const RadialKernel& phi, const KernelConditionReport& rep,
                                    const CertifyOptions& opt) {
  if (opt.phi_floor) {
    const auto [alpha, rho] = *opt.phi_floor;
    if (!(alpha > 0.0) || !(rho > 0.0)) throw CertificationError("phi_floor override needs alpha > 0 and rho > 0");
    const int n = 4096;
    for (int i = 0; i <= n; ++i) {
      const double r = rho * i / n;
      if (phi(r) < alpha) {
        throw CertificationError("phi_floor override fails: phi(" + fmt(r) + ") = " + fmt(phi(r)) + " < alpha = " +
                                 fmt(alpha));
      }
    }
    return {alpha, rho};
  }
  if (!rep.phi_floor) throw CertificationError("phi is not separated from 0 near the origin (no alpha > 0)");
  return {rep.alpha, rep.rho};
}

void record_conditions(CertifiedBounds& b, const KernelConditionReport& rep) {
  b.conditions = rep;
  b.constants["B"] = rep.B_found;
  b.constants["B_linear"] = rep.B_linear;
  b.constants["p"] = rep.p_found;
  b.notes.push_back("kernel conditions " + rep.note);
}

}  // namespace

BirthModel certify_bounds(const ModelVariant& m, const Window& w, const CertifyOptions& opt) {
  CertifiedBounds b;
  std::visit(
      overloaded{
          [&](const model::Fecundity& f) {
            check_kernel(f.a, "a", w);
            check_kernel(f.phi, "phi", w);
            check_kernel(f.c, "c", w);
            const auto rep = check_conditions(f.a, f.phi, f.c, opt.gw, opt.grid);
            record_conditions(b, rep);
            if (!rep.c_dominated) throw CertificationError("no p >= 0 with c <= p phi: " + rep.failures.front());
            if (!rep.bounded_by_G) throw CertificationError("a <= B G^2, phi <= B G fails: " + rep.failures.front());
            const auto [alpha, rho] = phi_floor(f.phi, rep, opt);
            const double p = rep.p_found;

            LatticeBoundInput lb;
            const RadialKernel env = f.a.nonincreasing_envelope();
            lb.b_f = [env](double s) { return env(s); };
            lb.support = env.is_zero() ? 0.0 : env.cutoff();
            lb.alpha = 0.5 * alpha;
            lb.rho = rho;
            lb.dim = w.dim;
            lb.truncate = w.max_distance();
            const LatticeBoundResult res = lattice_bound(lb);

            b.constants["alpha"] = alpha;
            b.constants["rho"] = rho;
            b.constants["r_p"] = r_p(p);
            b.constants["C_p"] = C_p(p);
            b.constants["kappa"] = f.a.mass();
            b.constants["lattice_bound"] = res.bound;
            b.constants["lattice_series"] = res.series;
            b.constants["lattice_prefactor"] = res.prefactor;
            b.global = C_p(p) * res.bound;
            b.per_parent = f.a.mass() * r_p(p);
            b.notes.push_back("lattice bound uses the prefactor e^alpha/(alpha e) with alpha = phi floor / 2");
          },
          [&](const model::Establishment& e) {
            check_kernel(e.a, "a", w);
            check_kernel(e.phi, "phi", w);
            check_kernel(e.c, "c", w);
            const auto rep = check_conditions(e.a, e.phi, e.c, opt.gw, opt.grid);
            record_conditions(b, rep);
            if (!rep.c_dominated) throw CertificationError("no p >= 0 with c <= p phi: " + rep.failures.front());
            // a <= q phi with the same grid as the conditions
            const auto q_rep = check_conditions(e.phi, e.phi, e.a, opt.gw, opt.grid);
            if (!q_rep.c_dominated) throw CertificationError("no q with a <= q phi: a > 0 where phi = 0");
            const double p = rep.p_found, q = q_rep.p_found;
            b.constants["q"] = q;
            b.constants["r_p"] = r_p(p);
            b.constants["s_star"] = establishment_argmax(p);
            b.constants["kappa"] = e.a.mass();
            b.global = q * establishment_peak(p);
            b.per_parent = e.a.mass() * r_p(p);
          },
          [&](const model::Glauber& g) {
            check_kernel(g.phi, "phi", w);
            if (!(g.z >= 0.0) || !std::isfinite(g.z)) throw CertificationError("Glauber activity z must be >= 0");
            b.constants["z"] = g.z;
            b.global = g.z;
          },
          [&](const model::Surgailis& s) {
            if (!(s.rate >= 0.0) || !std::isfinite(s.rate))
              throw CertificationError("Surgailis birth rate must be >= 0");
            b.constants["b"] = s.rate;
            b.global = s.rate;
          },
          [&](const model::Contact& c) {
            check_kernel(c.g, "g", w);
            b.constants["g_mass"] = c.g.mass();
            b.per_parent = c.g.mass();
            b.notes.push_back("contact birth rate is unbounded; only per-parent thinning applies");
          },
      },
      m);
  return BirthModel(m, std::move(b));
}

}  // namespace bdproc
