#include "bdproc/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bdproc/numerics.hpp"
#include "bdproc/rng.hpp"
#include "bdproc/stats.hpp"

namespace bdproc {

PairKernel default_pair_kernel(int dim) { return PairKernel{0.5 * dim, dim + 1.0}; }

namespace {

struct Direction {
  Vec v;
  double weight;
};

std::vector<Direction> directions(int d, int na) {
  std::vector<Direction> out;
  if (d == 1) {
    out.push_back({{1.0, 0.0, 0.0}, 1.0});
    out.push_back({{-1.0, 0.0, 0.0}, 1.0});
  } else if (d == 2) {
    const double w = 2.0 * std::numbers::pi / na;
    for (int i = 0; i < na; ++i) {
      const double th = (i + 0.5) * w;
      out.push_back({{std::cos(th), std::sin(th), 0.0}, w});
    }
  } else {
    const int nz = std::max(1, na / 2);
    const double wz = 2.0 / nz, wa = 2.0 * std::numbers::pi / na;
    for (int j = 0; j < nz; ++j) {
      const double z = -1.0 + (j + 0.5) * wz;
      const double s = std::sqrt(1.0 - z * z);
      for (int i = 0; i < na; ++i) {
        const double th = (i + 0.5) * wa;
        out.push_back({{s * std::cos(th), s * std::sin(th), z}, wz * wa});
      }
    }
  }
  return out;
}

// Distance from x along v to the boundary of the box [lo, hi] (componentwise).
double exit_distance(const Point& x, const Vec& v, const Point& lo, const Point& hi, int d) {
  double t = std::numeric_limits<double>::infinity();
  for (int k = 0; k < d; ++k) {
    if (v[k] > 0.0) t = std::min(t, (hi[k] - x[k]) / v[k]);
    if (v[k] < 0.0) t = std::min(t, (lo[k] - x[k]) / v[k]);
  }
  return std::max(t, 0.0);
}

// int_0^Q f(x + q v) K(q) q^{d-1} dq with the singular and tail parts mapped
// to smooth integrands, midpoint rule with n nodes per segment.
template <class F>
double ray_integral(const F& f, const Point& x, const Vec& v, double Q, const PairKernel& K, int d, int n) {
  auto at = [&](double q) {
    Point y = x;
    for (int k = 0; k < d; ++k) y[k] += q * v[k];
    return f(y);
  };
  double total = 0.0;
  // [0, min(1,Q)]: q = s^k, k = 1/(d - beta0) turns q^{d-1-beta0} dq into k ds
  const double k = 1.0 / (d - K.beta0);
  const double qa = std::min(1.0, Q);
  const double smax = std::pow(qa, d - K.beta0);
  if (smax > 0.0) {
    const double hs = smax / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += at(std::pow((i + 0.5) * hs, k));
    total += k * acc * hs;
  }
  if (Q > 1.0) {
    // [1, Q]: u = q^{d-beta1}, q^{d-1-beta1} dq = du / (d - beta1)
    const double e = d - K.beta1;
    const double ulo = std::isfinite(Q) ? std::pow(Q, e) : 0.0;
    const double hu = (1.0 - ulo) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += at(std::pow(ulo + (i + 0.5) * hu, 1.0 / e));
    total += acc * hu / (K.beta1 - d);
  }
  return total;
}

// int f(y) K(|x-y|) dy over the torus (Periodic), or under Free over R^d
// (whole_space) or the window box.
template <class F>
double polar_integral(const F& f, const Point& x, const PairKernel& K, const Window& w, bool whole_space, int nr,
                      int na) {
  const int d = w.dim;
  double total = 0.0;
  for (const Direction& dir : directions(d, na)) {
    double Q;
    if (w.boundary == Boundary::Periodic) {
      Point lo{0, 0, 0}, hi{0, 0, 0};
      for (int k = 0; k < d; ++k) {
        lo[k] = x[k] - w.half();
        hi[k] = x[k] + w.half();
      }
      Q = exit_distance(x, dir.v, lo, hi, d);
    } else if (whole_space) {
      Q = std::numeric_limits<double>::infinity();
    } else {
      Point lo{0, 0, 0}, hi{w.side, w.side, w.side};
      Q = exit_distance(x, dir.v, lo, hi, d);
    }
    total += dir.weight * ray_integral(f, x, dir.v, Q, K, d, nr);
  }
  return total;
}

void check_pair_kernel(const PairKernel& K, int d) {
  if (!(K.beta0 > 0.0 && K.beta0 < d)) {
    throw LyapunovError("pair kernel needs 0 < beta0 < d (local integrability); got beta0=" + std::to_string(K.beta0));
  }
  if (!(K.beta1 > d)) {
    throw LyapunovError("pair kernel needs beta1 > d (integrable tail); got beta1=" + std::to_string(K.beta1));
  }
}

}  // namespace

C1Result certify_C1(const std::function<double(const Point&)>& phi, const PairKernel& K, const Window& w,
                    const C1Options& opt) {
  check_pair_kernel(K, w.dim);
  const int d = w.dim;
  std::vector<Point> pts = opt.points;
  if (pts.empty()) {
    pts.push_back(w.center());
    if (d <= 2) {
      const double f[3] = {0.25, 0.5, 0.75};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < (d == 2 ? 3 : 1); ++j) {
          Point p{f[i] * w.side, d == 2 ? f[j] * w.side : 0.0, 0.0};
          pts.push_back(p);
        }
    } else {
      for (int k = 0; k < 3; ++k)
        for (double s : {0.25, 0.75}) {
          Point p = w.center();
          p[k] = s * w.side;
          pts.push_back(p);
        }
    }
  }
  auto wrapped = [&](const Point& y) {
    return phi(w.boundary == Boundary::Periodic ? w.canonical(y) : y);
  };
  C1Result res;
  res.value = -1.0;
  for (const Point& x : pts) {
    const double coarse = polar_integral(wrapped, x, K, w, true, opt.radial_nodes, opt.angular_nodes);
    const double fine = polar_integral(wrapped, x, K, w, true, 2 * opt.radial_nodes, 2 * opt.angular_nodes);
    const double extrap = fine + (fine - coarse) / 3.0;
    const double err = std::abs(fine - coarse) / 3.0;
    if (extrap > res.value) {
      res.value = extrap;
      res.coarse = coarse;
      res.fine = fine;
      res.argmax = x;
    }
    res.error = std::max(res.error, err);
  }
  return res;
}

double window_h_mass(const GWeight& gw, const Window& w) {
  const double a = w.half();
  switch (w.dim) {
    case 1: return 2.0 * gk_integral([&](double x) { return gw(x); }, 0.0, a);
    case 2:
      return 4.0 * gk_integral(
                       [&](double x) { return gk_integral([&](double y) { return gw(std::hypot(x, y)); }, 0.0, a); },
                       0.0, a);
    default:
      return 8.0 * gk_integral(
                       [&](double x) {
                         return gk_integral(
                             [&](double y) {
                               return gk_integral(
                                   [&](double z) { return gw(std::sqrt(x * x + y * y + z * z)); }, 0.0, a, 1e-9);
                             },
                             0.0, a, 1e-9);
                       },
                       0.0, a, 1e-9);
  }
}

LyapunovSpec calibrate_spec(double bconst, const PairKernel& K, const GWeight& gw, const Window& w,
                            const C1Options& opt) {
  if (!(bconst > 0.0)) throw LyapunovError("Lyapunov calibration needs a positive birth-rate bound");
  if (gw.dim != w.dim) throw LyapunovError("G weight and window dimensions differ");
  LyapunovSpec spec;
  spec.window = w;
  spec.gw = gw;
  spec.K = K;
  spec.center = w.center();
  spec.bconst = bconst;
  const Point ctr = spec.center;
  const C1Result cg = certify_C1([&](const Point& y) { return gw(distance(y, ctr, w)); }, K, w, opt);
  spec.C_G = cg.value + cg.error;
  spec.C_G_error = cg.error;
  spec.c = 1.0 / std::sqrt(2.0 * spec.C_G * bconst);
  spec.C1 = spec.c * spec.C_G;
  spec.h_mass = window_h_mass(gw, w);
  return spec;
}

double pair_potential(const Point& x, const Point& y, const LyapunovSpec& spec) {
  const double r = distance(x, y, spec.window);
  if (r == 0.0) throw LyapunovError("pair potential at coincident points (K is singular at 0)");
  const double px = spec.phi(x), py = spec.phi(y);
  if (px == 0.0 || py == 0.0) return 0.0;
  return px * py * spec.K(r);
}

double W_value(const Configuration& cfg, const LyapunovSpec& spec) {
  const auto& pts = cfg.points();
  std::vector<double> ph(pts.size());
  double w = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double hv = spec.h(pts[i]);
    w += hv;
    ph[i] = spec.c * hv;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (ph[i] == 0.0) continue;
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double r = distance(pts[i], pts[j], spec.window);
      if (r == 0.0) throw LyapunovError("pair potential at coincident points (K is singular at 0)");
      w += ph[i] * ph[j] * spec.K(r);
    }
  }
  return w;
}

double W_increment(const Point& x, const Configuration& cfg, const LyapunovSpec& spec,
                   std::optional<ParticleId> exclude) {
  const double hx = spec.h(x);
  const double px = spec.c * hx;
  if (px == 0.0) return hx;
  double s = 0.0;
  const auto& pts = cfg.points();
  const auto& ids = cfg.ids();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (exclude && ids[i] == *exclude) continue;
    const double r = distance(x, pts[i], spec.window);
    if (r == 0.0) throw LyapunovError("pair potential at coincident points (K is singular at 0)");
    s += spec.phi(pts[i]) * spec.K(r);
  }
  return hx + px * s;
}

LWResult LW_exact(const Configuration& cfg, const BirthModel& model, const LyapunovSpec& spec,
                  const LWOptions& opt) {
  const Window& w = spec.window;
  const int d = w.dim;
  LWResult res;
  res.W = W_value(cfg, spec);
  double sum_h = 0.0;
  for (const Point& p : cfg.points()) sum_h += spec.h(p);
  const double V = res.W - sum_h;
  res.death_part = -sum_h - 2.0 * V;

  auto b_at = [&](const Point& x) {
    if (!w.contains(x)) return 0.0;
    return model.birth_rate(x, cfg);
  };

  double tol_h = 0.0;
  if (d <= 2) {
    auto grid_sum = [&](int n) {
      const double hcell = w.side / n;
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < (d == 2 ? n : 1); ++j) {
          Point x{(i + 0.5) * hcell, d == 2 ? (j + 0.5) * hcell : 0.0, 0.0};
          const double hv = spec.h(x);
          if (hv > 0.0) s += b_at(x) * hv;
        }
      }
      return s * std::pow(hcell, d);
    };
    const double fine = grid_sum(opt.grid);
    const double coarse = grid_sum(opt.grid / 2);
    res.birth_h = fine;
    tol_h = std::abs(fine - coarse);
  } else {
    Rng rng(opt.seed, "lw-monte-carlo");
    Welford acc;
    for (std::size_t i = 0; i < opt.mc_samples; ++i) {
      Point x{rng.uniform(0.0, w.side), rng.uniform(0.0, w.side), rng.uniform(0.0, w.side)};
      acc.add(b_at(x) * spec.h(x));
    }
    res.birth_h = acc.mean() * w.volume();
    tol_h = 3.0 * acc.stderr_mean() * w.volume();
  }

  double coarse_psi = 0.0, fine_psi = 0.0;
  if (!cfg.empty()) {
    auto integrand = [&](const Point& x) {
      const Point xc = w.boundary == Boundary::Periodic ? w.canonical(x) : x;
      const double pv = spec.phi(xc);
      if (pv == 0.0) return 0.0;
      return b_at(xc) * pv;
    };
    for (const Point& y : cfg.points()) {
      const double py = spec.phi(y);
      if (py == 0.0) continue;
      coarse_psi += py * polar_integral(integrand, y, spec.K, w, false, opt.radial_nodes, opt.angular_nodes);
      fine_psi += py * polar_integral(integrand, y, spec.K, w, false, 2 * opt.radial_nodes, 2 * opt.angular_nodes);
    }
  }
  res.birth_psi = fine_psi;
  res.value = res.death_part + res.birth_h + res.birth_psi;
  res.tolerance = tol_h + std::abs(fine_psi - coarse_psi);
  res.drift_bound = spec.bconst * spec.h_mass - 0.5 * res.W;
  res.abs_bound = spec.bconst * spec.h_mass + 2.0 * res.W;
  return res;
}

// ---------------------------------------------------------------------------

void ReturnTimeTracker::update(double t, double W) {
  if (done_) return;
  if (t <= sample_.delta) {
    last_W_ = W;
    return;
  }
  if (!checked_delta_) {
    checked_delta_ = true;
    if (last_W_ < sample_.K_level) {
      sample_.tau = sample_.delta;
      sample_.censored = false;
      done_ = true;
      return;
    }
  }
  if (W < sample_.K_level) {
    sample_.tau = t;
    sample_.censored = false;
    done_ = true;
  }
  last_W_ = W;
}

void ReturnTimeTracker::finish(double W_at_end) {
  if (done_) return;
  last_W_ = W_at_end;
  if (!checked_delta_ && t_max_ >= sample_.delta && last_W_ < sample_.K_level) {
    sample_.tau = sample_.delta;
    sample_.censored = false;
  } else {
    sample_.tau = t_max_;
    sample_.censored = true;
  }
  done_ = true;
}

ReturnTimeSample tau_K(const EventLog& log, const LyapunovSpec& spec, double K_level, double delta) {
  if (!(K_level > 0.0)) throw LyapunovError("return level K must be positive");
  Configuration cfg(spec.window, spec.window.side);
  ReturnTimeTracker tracker(K_level, delta, log.t_end);
  double W = 0.0;
  std::size_t i = 0;
  // initial particles are births at t = 0
  while (i < log.events.size() && log.events[i].t == 0.0) {
    const Event& e = log.events[i++];
    if (e.proc != 0) continue;
    W += W_increment(e.x, cfg, spec);
    cfg.insert_with_id(e.id, e.x);
  }
  tracker.update(0.0, W);
  for (; i < log.events.size(); ++i) {
    const Event& e = log.events[i];
    if (e.proc != 0) continue;
    if (e.kind == EventKind::Birth) {
      W += W_increment(e.x, cfg, spec);
      cfg.insert_with_id(e.id, e.x);
    } else {
      cfg.remove(e.id);
      W -= W_increment(e.x, cfg, spec);
    }
    tracker.update(e.t, W);
    if (tracker.done()) break;
  }
  tracker.finish(W);
  return tracker.sample();
}

// ---------------------------------------------------------------------------

DriftReport drift_audit(const std::vector<double>& times, const std::vector<std::vector<double>>& W_samples,
                        double bconst, double h_mass, double sigmas) {
  DriftReport rep;
  const std::size_t n = W_samples.size();
  if (n == 0) throw LyapunovError("drift audit needs at least one replicate");
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i) col[i] = W_samples[i][0];
  const double W0 = summarize(col).mean;
  rep.limsup_bound = 2.0 * bconst * h_mass;
  Welford tail;
  const double t_last = times.back();
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = W_samples[i][k];
    const Summary s = summarize(col);
    DriftRow row;
    row.t = times[k];
    row.mean = s.mean;
    row.se = s.se;
    row.bound = std::exp(-0.5 * times[k]) * W0 + rep.limsup_bound;
    row.pass = s.mean <= row.bound + sigmas * s.se;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
    if (times[k] >= 0.75 * t_last) tail.add(s.mean);
  }
  rep.limsup_estimate = tail.mean();
  return rep;
}

ReturnTimeReport return_time_audit(const std::vector<ReturnTimeSample>& samples, const std::vector<double>& W0,
                                   double bconst, double h_mass, double theta, double sigmas) {
  ReturnTimeReport rep;
  rep.replicates = samples.size();
  rep.theta = theta;
  if (samples.empty()) throw LyapunovError("return-time audit needs at least one replicate");
  const double K = samples.front().K_level;
  const double bh = bconst * h_mass;
  rep.mean_W0 = summarize(W0).mean;
  std::vector<double> taus, exps;
  for (const auto& s : samples) {
    if (s.censored) {
      ++rep.censored;
      continue;
    }
    taus.push_back(s.tau);
    exps.push_back(std::exp(theta * s.tau));
  }
  rep.censored_fraction = static_cast<double>(rep.censored) / static_cast<double>(samples.size());
  if (!taus.empty()) {
    const Summary st = summarize(taus), se = summarize(exps);
    rep.mean_tau = st.mean;
    rep.se_tau = st.se;
    rep.mean_exp = se.mean;
    rep.se_exp = se.se;
  }
  if (K > bh) {
    rep.mean_bound = rep.mean_W0 / (K - bh);
    rep.mean_pass = !taus.empty() && rep.mean_tau <= rep.mean_bound + sigmas * rep.se_tau;
  }
  rep.exp_bound = rep.mean_W0 + 1.0;
  rep.exp_applicable = theta > 0.0 && theta < 0.5 && K > (theta + bh) / (0.5 - theta);
  rep.exp_pass = rep.exp_applicable && !taus.empty() && std::isfinite(rep.mean_exp) &&
                 rep.mean_exp <= rep.exp_bound + sigmas * rep.se_exp;
  return rep;
}

}  // namespace bdproc
