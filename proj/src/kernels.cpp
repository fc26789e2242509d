#include "bdproc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "bdproc/numerics.hpp"

namespace bdproc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double tabulated_value(const profile::Tabulated& t, double r) {
  if (r > t.r.back()) return 0.0;
  if (r <= t.r.front()) return t.v.front();
  auto it = std::upper_bound(t.r.begin(), t.r.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - t.r.begin());
  const double r0 = t.r[i - 1], r1 = t.r[i];
  const double w = (r - r0) / (r1 - r0);
  return t.v[i - 1] + w * (t.v[i] - t.v[i - 1]);
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw KernelError(std::string(what) + " must be positive and finite");
}

void check_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw KernelError(std::string(what) + " must be nonnegative and finite");
}

}  // namespace

double power_tail(int dim, double beta, double R) {
  if (!(beta > dim)) throw KernelError("power-law tail integral diverges (exponent <= d)");
  const double u = 1.0 + R;
  double t = 0.0;
  switch (dim) {
    case 1: t = std::pow(u, 1.0 - beta) / (beta - 1.0); break;
    case 2: t = std::pow(u, 2.0 - beta) / (beta - 2.0) - std::pow(u, 1.0 - beta) / (beta - 1.0); break;
    case 3:
      t = std::pow(u, 3.0 - beta) / (beta - 3.0) - 2.0 * std::pow(u, 2.0 - beta) / (beta - 2.0) +
          std::pow(u, 1.0 - beta) / (beta - 1.0);
      break;
    default: throw KernelError("dimension must be 1, 2 or 3");
  }
  return sphere_area(dim) * std::max(t, 0.0);
}

double gaussian_tail(int dim, double sigma, double R) {
  const double e = std::exp(-R * R / (2.0 * sigma * sigma));
  const double erfc_term = sigma * std::sqrt(std::numbers::pi / 2.0) * std::erfc(R / (sigma * std::numbers::sqrt2));
  double t = 0.0;
  switch (dim) {
    case 1: t = erfc_term; break;
    case 2: t = sigma * sigma * e; break;
    case 3: t = sigma * sigma * R * e + sigma * sigma * erfc_term; break;
    default: throw KernelError("dimension must be 1, 2 or 3");
  }
  return sphere_area(dim) * t;
}

double radial_integral(const std::function<double(double)>& f, int dim, double lo, double hi,
                       const std::vector<double>& breaks, double rel_tol) {
  if (!(hi > lo)) return 0.0;
  std::vector<double> knots{lo};
  for (double b : breaks) {
    if (b > lo && b < hi) knots.push_back(b);
  }
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  auto integrand = [&](double r) {
    const double v = f(r);
    if (!std::isfinite(v)) throw KernelError("non-finite kernel sample at r=" + fmt(r));
    return dim == 1 ? v : v * std::pow(r, dim - 1);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i], b = knots[i + 1];
    // Long segments are split geometrically so slowly decaying tails converge.
    std::vector<double> sub{a};
    if (b > 4.0 * std::max(a, 1.0)) {
      double x = std::max(a, 1.0);
      if (x > a) sub.push_back(x);
      while (2.0 * x < b) {
        x *= 2.0;
        sub.push_back(x);
      }
    }
    sub.push_back(b);
    for (std::size_t j = 0; j + 1 < sub.size(); ++j) {
      total += midpoint_integral(integrand, sub[j], sub[j + 1], rel_tol, 1e-300);
    }
  }
  return sphere_area(dim) * total;
}

double g_weight(const Vec& x, const GWeight& gw) { return gw(norm(x, gw.dim)); }

// ---------------------------------------------------------------------------

RadialKernel::RadialKernel(Profile p, int dim, KernelOptions opt) : profile_(std::move(p)), dim_(dim), opt_(opt) {
  if (dim < 1 || dim > 3) throw KernelError("kernel dimension must be 1, 2 or 3");
  finish(opt);
}

double RadialKernel::raw(double r) const {
  const double v = std::visit(
      overloaded{
          [](const profile::Zero&) { return 0.0; },
          [r](const profile::TopHat& k) { return r <= k.radius ? k.height : 0.0; },
          [r](const profile::Triangular& k) { return r <= k.radius ? k.height * (1.0 - r / k.radius) : 0.0; },
          [r](const profile::Gaussian& k) { return k.height * std::exp(-r * r / (2.0 * k.sigma * k.sigma)); },
          [r](const profile::PowerLaw& k) { return k.height * std::pow(1.0 + r, -k.exponent); },
          [r](const profile::Tabulated& k) { return tabulated_value(k, r); },
          [r](const profile::Custom& k) { return k.fn(r); },
      },
      profile_);
  return scale_ * v;
}

void RadialKernel::finish(const KernelOptions& opt) {
  if (opt.cutoff) check_positive(*opt.cutoff, "kernel cutoff");
  const double inf = std::numeric_limits<double>::infinity();
  double support = inf;
  double analytic_full = -1.0;  // < 0: compute numerically over the support

  std::visit(overloaded{
                 [&](const profile::Zero&) {
                   zero_ = true;
                   support = 0.0;
                 },
                 [&](const profile::TopHat& k) {
                   check_nonnegative(k.height, "top-hat height");
                   check_positive(k.radius, "top-hat radius");
                   support = k.radius;
                   zero_ = k.height == 0.0;
                 },
                 [&](const profile::Triangular& k) {
                   check_nonnegative(k.height, "triangular height");
                   check_positive(k.radius, "triangular radius");
                   support = k.radius;
                   zero_ = k.height == 0.0;
                 },
                 [&](const profile::Gaussian& k) {
                   check_nonnegative(k.height, "gaussian height");
                   check_positive(k.sigma, "gaussian sigma");
                   analytic_full = k.height * gaussian_tail(dim_, k.sigma, 0.0);
                   zero_ = k.height == 0.0;
                 },
                 [&](const profile::PowerLaw& k) {
                   check_nonnegative(k.height, "power-law height");
                   check_positive(k.exponent, "power-law exponent");
                   analytic_full = k.exponent > dim_ ? k.height * power_tail(dim_, k.exponent, 0.0) : inf;
                   zero_ = k.height == 0.0;
                 },
                 [&](const profile::Tabulated& k) {
                   if (k.r.size() < 2 || k.r.size() != k.v.size())
                     throw KernelError("tabulated kernel needs at least two (radius, value) rows");
                   if (k.r.front() < 0.0) throw KernelError("tabulated radii must be nonnegative");
                   for (std::size_t i = 0; i < k.r.size(); ++i) {
                     check_nonnegative(k.v[i], "tabulated value");
                     if (i > 0 && !(k.r[i] > k.r[i - 1]))
                       throw KernelError("tabulated radii must be strictly increasing");
                   }
                   support = k.r.back();
                   zero_ = std::all_of(k.v.begin(), k.v.end(), [](double v) { return v == 0.0; });
                   nonincreasing_ = std::is_sorted(k.v.rbegin(), k.v.rend());
                 },
                 [&](const profile::Custom& k) {
                   if (!k.fn) throw KernelError("custom kernel without a function");
                   support = k.support;
                   nonincreasing_ = k.nonincreasing;
                 },
             },
             profile_);

  if (zero_) {
    cutoff_ = 0.0;
    mass_ = full_mass_ = 0.0;
    return;
  }

  if (opt.cutoff) {
    cutoff_ = std::min(*opt.cutoff, support);
  } else if (std::isfinite(support)) {
    cutoff_ = support;
  } else {
    // Truncate where the omitted mass is a small fraction of the whole.
    std::function<double(double)> tail;
    if (auto* g = std::get_if<profile::Gaussian>(&profile_)) {
      tail = [this, g](double R) { return g->height * gaussian_tail(dim_, g->sigma, R); };
    } else if (auto* p = std::get_if<profile::PowerLaw>(&profile_)) {
      if (!(p->exponent > dim_))
        throw KernelError("power-law kernel with exponent <= d has infinite mass; give an explicit cutoff");
      tail = [this, p](double R) { return p->height * power_tail(dim_, p->exponent, R); };
    } else {
      throw KernelError("kernel '" + describe() + "' has unbounded support; give an explicit cutoff");
    }
    const double target = opt.truncation_tol * analytic_full;
    double hi = 1.0;
    while (tail(hi) > target) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (tail(mid) > target ? lo : hi) = mid;
    }
    cutoff_ = hi;
  }

  mass_ = radial_integral([this](double r) { return raw(r); }, dim_, 0.0, cutoff_, breakpoints());
  full_mass_ = analytic_full >= 0.0 ? analytic_full : mass_;
  if (full_mass_ < mass_) full_mass_ = mass_;
}

double RadialKernel::peak() const { return max_on(0.0, cutoff_); }

double RadialKernel::max_on(double lo, double hi) const {
  if (zero_ || lo > cutoff_) return 0.0;
  hi = std::min(hi, cutoff_);
  if (nonincreasing_) return raw(lo);
  double m = std::max(raw(lo), raw(hi));
  if (auto* t = std::get_if<profile::Tabulated>(&profile_)) {
    for (std::size_t i = 0; i < t->r.size(); ++i) {
      if (t->r[i] >= lo && t->r[i] <= hi) m = std::max(m, scale_ * t->v[i]);
    }
    return m;
  }
  // Non-monotone custom profile: dense sampling plus breakpoints.
  for (int i = 1; i < 256; ++i) m = std::max(m, raw(lo + (hi - lo) * i / 256.0));
  for (double b : breakpoints()) {
    if (b >= lo && b <= hi) m = std::max(m, raw(b));
  }
  return m;
}

std::vector<double> RadialKernel::breakpoints() const {
  std::vector<double> out;
  std::visit(overloaded{
                 [&](const profile::TopHat& k) { out.push_back(k.radius); },
                 [&](const profile::Triangular& k) { out.push_back(k.radius); },
                 [&](const profile::Tabulated& k) { out = k.r; },
                 [&](const profile::Custom& k) { out = k.breaks; },
                 [](const auto&) {},
             },
             profile_);
  std::vector<double> kept;
  for (double b : out) {
    if (b > 0.0 && b <= cutoff_) kept.push_back(b);
  }
  if (cutoff_ > 0.0) kept.push_back(cutoff_);
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  return kept;
}

RadialKernel RadialKernel::scaled(double factor) const {
  check_nonnegative(factor, "kernel scale factor");
  RadialKernel k = *this;
  k.scale_ *= factor;
  k.mass_ *= factor;
  k.full_mass_ *= factor;
  if (factor == 0.0) {
    k.zero_ = true;
    k.cutoff_ = 0.0;
  }
  return k;
}

RadialKernel RadialKernel::nonincreasing_envelope() const {
  if (nonincreasing_) return *this;
  const RadialKernel self = *this;
  profile::Custom env{"envelope(" + describe() + ")", [self](double s) { return self.max_on(s, self.cutoff()); },
                      cutoff_, breakpoints(), true};
  return RadialKernel(std::move(env), dim_, KernelOptions{cutoff_, opt_.truncation_tol});
}

std::string RadialKernel::describe() const {
  std::string s = std::visit(
      overloaded{
          [](const profile::Zero&) { return std::string("zero"); },
          [this](const profile::TopHat& k) {
            return "tophat height=" + fmt(scale_ * k.height) + " radius=" + fmt(k.radius);
          },
          [this](const profile::Triangular& k) {
            return "triangular height=" + fmt(scale_ * k.height) + " radius=" + fmt(k.radius);
          },
          [this](const profile::Gaussian& k) {
            return "gaussian height=" + fmt(scale_ * k.height) + " sigma=" + fmt(k.sigma);
          },
          [this](const profile::PowerLaw& k) {
            return "powerlaw height=" + fmt(scale_ * k.height) + " exponent=" + fmt(k.exponent);
          },
          [this](const profile::Tabulated& k) {
            std::string r = "tabulated r=", v = " v=";
            for (std::size_t i = 0; i < k.r.size(); ++i) {
              r += (i ? "," : "") + fmt(k.r[i]);
              v += (i ? "," : "") + fmt(scale_ * k.v[i]);
            }
            return r + v;
          },
          [](const profile::Custom& k) { return "custom name=" + k.name; },
      },
      profile_);
  if (opt_.cutoff) s += " cutoff=" + fmt(*opt_.cutoff);
  if (opt_.truncation_tol != 1e-6) s += " tol=" + fmt(opt_.truncation_tol);
  return s;
}

// ---------------------------------------------------------------------------

profile::Tabulated load_tabulated(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw KernelError("cannot open tabulated kernel file '" + path + "'");
  profile::Tabulated t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double r, v;
    if (!(ss >> r)) continue;
    if (!(ss >> v)) throw KernelError(path + ":" + std::to_string(lineno) + ": expected two columns");
    std::string extra;
    if (ss >> extra) throw KernelError(path + ":" + std::to_string(lineno) + ": expected two columns");
    t.r.push_back(r);
    t.v.push_back(v);
  }
  return t;
}

namespace {

double parse_number(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw KernelError("kernel parameter '" + key + "': not a number: '" + value + "'");
  }
  if (pos != value.size()) throw KernelError("kernel parameter '" + key + "': not a number: '" + value + "'");
  return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  return out;
}

}  // namespace

RadialKernel parse_kernel(const std::string& spec, int dim, const std::string& base_dir) {
  std::istringstream ss(spec);
  std::string type;
  if (!(ss >> type)) throw KernelError("empty kernel specification");
  std::map<std::string, std::string> kv;
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw KernelError("kernel parameter '" + tok + "' is not key=value");
    const std::string key = tok.substr(0, eq);
    if (kv.count(key)) throw KernelError("kernel parameter '" + key + "' given twice");
    kv[key] = tok.substr(eq + 1);
  }

  auto allow = [&](std::set<std::string> keys) {
    for (const auto& [k, v] : kv) {
      if (!keys.count(k)) throw KernelError("unknown parameter '" + k + "' for kernel type '" + type + "'");
    }
  };
  auto num = [&](const std::string& k, std::optional<double> def = std::nullopt) {
    auto it = kv.find(k);
    if (it == kv.end()) {
      if (def) return *def;
      throw KernelError("kernel type '" + type + "' needs parameter '" + k + "'");
    }
    return parse_number(k, it->second);
  };

  KernelOptions opt;
  if (kv.count("cutoff")) opt.cutoff = num("cutoff");
  if (kv.count("tol")) opt.truncation_tol = num("tol");

  // Builds a kernel whose height is either given or fixed by a target mass.
  auto with_height = [&](auto make) -> RadialKernel {
    if (kv.count("height") && kv.count("mass")) throw KernelError("give either height= or mass=, not both");
    if (kv.count("mass")) {
      const double target = num("mass");
      check_nonnegative(target, "kernel mass");
      RadialKernel unit(make(1.0), dim, opt);
      if (!(unit.mass() > 0.0)) throw KernelError("cannot scale a kernel of zero mass");
      return RadialKernel(make(target / unit.mass()), dim, opt);
    }
    return RadialKernel(make(num("height", 1.0)), dim, opt);
  };

  if (type == "zero") {
    allow({});
    return RadialKernel(profile::Zero{}, dim);
  }
  if (type == "tophat") {
    allow({"height", "mass", "radius"});
    const double radius = num("radius");
    return with_height([&](double h) { return profile::TopHat{h, radius}; });
  }
  if (type == "triangular") {
    allow({"height", "mass", "radius"});
    const double radius = num("radius");
    return with_height([&](double h) { return profile::Triangular{h, radius}; });
  }
  if (type == "gaussian") {
    allow({"height", "mass", "sigma", "cutoff", "tol"});
    const double sigma = num("sigma");
    return with_height([&](double h) { return profile::Gaussian{h, sigma}; });
  }
  if (type == "powerlaw") {
    allow({"height", "mass", "exponent", "cutoff", "tol"});
    const double exponent = num("exponent");
    return with_height([&](double h) { return profile::PowerLaw{h, exponent}; });
  }
  if (type == "tabulated") {
    allow({"path", "r", "v", "cutoff"});
    profile::Tabulated t;
    if (kv.count("path")) {
      if (kv.count("r") || kv.count("v")) throw KernelError("tabulated kernel: give path= or r=/v=, not both");
      std::string path = kv["path"];
      if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
      t = load_tabulated(path);
    } else {
      if (!kv.count("r") || !kv.count("v")) throw KernelError("tabulated kernel needs path= or both r= and v=");
      t.r = parse_list("r", kv["r"]);
      t.v = parse_list("v", kv["v"]);
    }
    return RadialKernel(std::move(t), dim, opt);
  }
  throw KernelError("unknown kernel type '" + type + "'");
}

// ---------------------------------------------------------------------------

KernelConditionReport check_conditions(const RadialKernel& a, const RadialKernel& phi, const RadialKernel& c,
                                       const GWeight& gw, const ConditionGrid& grid) {
  KernelConditionReport rep;
  check_positive(grid.spacing, "condition grid spacing");
  const double r_max =
      grid.r_max.value_or(std::max({a.cutoff(), phi.cutoff(), c.cutoff(), grid.spacing}));

  std::vector<double> nodes;
  const auto n = static_cast<std::size_t>(std::ceil(r_max / grid.spacing));
  nodes.reserve(n + 16);
  for (std::size_t i = 0; i <= n; ++i) nodes.push_back(std::min(r_max, grid.spacing * static_cast<double>(i)));
  for (const RadialKernel* k : {&a, &phi, &c}) {
    for (double b : k->breakpoints()) {
      if (b <= r_max) nodes.push_back(b);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  rep.samples = nodes.size();

  const double inf = std::numeric_limits<double>::infinity();
  double b_sq = 1.0, b_lin = 1.0;
  double p = 0.0;
  const double phi0 = phi(0.0);
  double running_min = phi0;
  bool floor_open = phi0 > 0.0;

  for (double r : nodes) {
    const double av = a(r), fv = phi(r), cv = c(r), g = gw(r);
    if (!std::isfinite(av) || !std::isfinite(fv) || !std::isfinite(cv)) {
      rep.bounded_by_G = false;
      rep.failures.push_back("non-finite kernel sample at r=" + fmt(r));
      continue;
    }
    b_sq = std::max({b_sq, av / (g * g), fv / g});
    b_lin = std::max({b_lin, av / g, fv / g});
    if (cv > 0.0) {
      if (fv > 0.0) {
        p = std::max(p, cv / fv);
      } else if (std::isfinite(p)) {
        p = inf;
        rep.failures.push_back("c > 0 where phi = 0 (r=" + fmt(r) + "): no p with c <= p phi");
      }
    }
    if (floor_open) {
      if (fv >= 0.5 * phi0) {
        running_min = std::min(running_min, fv);
        rep.rho = r;
        rep.alpha = running_min;
      } else {
        floor_open = false;
      }
    }
  }

  rep.B_found = b_sq;
  rep.B_linear = b_lin;
  rep.p_found = p;
  rep.c_dominated = std::isfinite(p);
  rep.phi_floor = rep.alpha > 0.0 && rep.rho > 0.0;
  if (!rep.phi_floor) {
    rep.alpha = 0.0;
    rep.rho = 0.0;
    rep.failures.push_back("phi is not separated from 0 near the origin");
  }
  rep.note = "certified on a finite radial grid of " + std::to_string(rep.samples) + " radii up to r=" + fmt(r_max);
  return rep;
}

// ---------------------------------------------------------------------------

RadialSampler::RadialSampler(const RadialKernel& k, int bins) : kernel_(k), dim_(k.dim()) {
  if (k.is_zero() || !(k.mass() > 0.0)) return;
  const double rc = k.cutoff();
  edges_.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) edges_[i] = rc * i / bins;
  env_.resize(bins);
  cum_.resize(bins);
  double acc = 0.0;
  for (int i = 0; i < bins; ++i) {
    env_[i] = k.max_on(edges_[i], edges_[i + 1]);
    acc += env_[i] * (std::pow(edges_[i + 1], dim_) - std::pow(edges_[i], dim_));
    cum_[i] = acc;
  }
}

Vec RadialSampler::sample(Rng& rng) const {
  if (cum_.empty()) throw KernelError("cannot sample from a zero kernel");
  double r = 0.0;
  for (;;) {
    const double t = rng.uniform() * cum_.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), t) - cum_.begin());
    const std::size_t bin = std::min(i, cum_.size() - 1);
    const double lo = std::pow(edges_[bin], dim_), hi = std::pow(edges_[bin + 1], dim_);
    r = std::pow(lo + rng.uniform() * (hi - lo), 1.0 / dim_);
    if (rng.uniform() * env_[bin] <= kernel_(r)) break;
  }
  Vec v{0.0, 0.0, 0.0};
  if (dim_ == 1) {
    v[0] = rng.uniform() < 0.5 ? -r : r;
  } else if (dim_ == 2) {
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    v[0] = r * std::cos(th);
    v[1] = r * std::sin(th);
  } else {
    const double z = 2.0 * rng.uniform() - 1.0;
    const double th = 2.0 * std::numbers::pi * rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    v[0] = r * s * std::cos(th);
    v[1] = r * s * std::sin(th);
    v[2] = r * z;
  }
  return v;
}

}  // namespace bdproc
