// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Criterion numbers may be passed as arguments to
// run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "bdproc/analysis.hpp"
#include "bdproc/commands.hpp"
#include "bdproc/config.hpp"
#include "bdproc/engine.hpp"
#include "bdproc/lyapunov.hpp"
#include "bdproc/stats.hpp"

using namespace bdproc;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kSigmas = 3.0;
constexpr double kLatticeTol = 1e-9;
constexpr double kLWQuadratureFactor = 10.0;
constexpr double kFixpointResidual = 1e-8;
constexpr double kMassBalance = 1e-6;
constexpr double kCensoredMax = 0.01;
constexpr double kExtinctionMin = 0.99;
constexpr double kWilsonMin = 0.97;
constexpr double kWelchMin = 0.01;
constexpr double kSurgailisRuntime = 60.0;
constexpr int kAdversarialConfigs = 100000;
constexpr std::size_t kAdversarialMaxPoints = 200;
constexpr int kLWConfigs = 200;
constexpr int kLWMaxPoints = 100;
// Replicates per config for the determinism reruns; seeds do not depend on
// the ensemble size, so a prefix reproduces exactly what the full run does.
constexpr std::size_t kDeterminismReplicates = 32;

const std::string kConfigDir = std::string(BDPROC_SOURCE_DIR) + "/configs/";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Experiment load(const std::string& name) { return prepare(load_config(kConfigDir + name + ".ini")); }

Ensemble run(const Experiment& e, std::vector<double> times = {}, std::optional<Algorithm> alg = std::nullopt) {
  SimParams p = sim_params(e);
  if (!times.empty()) p.sample_times = std::move(times);
  if (alg) p.algorithm = *alg;
  return run_replicates(p, e.config.replicates, e.config.seed, observer_factory(e));
}

std::vector<std::vector<double>> per_replicate(const Ensemble& ens, const std::string& name) {
  std::vector<std::vector<double>> out;
  for (const auto& r : ens.runs) out.push_back(r.series(name));
  return out;
}

std::vector<ReturnTimeSample> return_samples(const Ensemble& ens, double K, double delta, std::vector<double>& W0) {
  std::vector<ReturnTimeSample> out;
  W0.clear();
  for (const auto& r : ens.runs) {
    out.push_back({K, delta, r.scalars.at("tau_K"), r.scalars.at("tau_censored") != 0.0});
    W0.push_back(r.scalars.at("W0"));
  }
  return out;
}

Point random_point(Rng& rng, const Window& w) {
  Point p{0.0, 0.0, 0.0};
  for (int k = 0; k < w.dim; ++k) p[k] = rng.uniform(0.0, w.side);
  return p;
}

// --- criteria ---------------------------------------------------------------

Outcome surgailis_density() {
  const auto start = std::chrono::steady_clock::now();
  const Experiment e = load("surgailis_density");
  const Ensemble ens = run(e, {0.0, 1.0, 2.0, 5.0});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double volB = std::pow(e.config.box_side, e.config.dim);
  const double b = e.model.global_bound();
  bool pass = secs < kSurgailisRuntime;
  std::string d;
  for (std::size_t k = 1; k < ens.times.size(); ++k) {
    const Summary s = summarize(ens.column("box_count", k));
    const double t = ens.times[k];
    const double curve = volB * b * (1.0 - std::exp(-t));
    const double z = (s.mean - curve) / s.se;
    pass = pass && std::abs(z) <= kSigmas;
    d += fmt("t=%g mean=%.4f curve=%.4f z=%+.2f; ", t, s.mean, curve, z);
  }
  return {pass, d + fmt("%zu reps in %.1fs", ens.runs.size(), secs)};
}

Outcome pathwise_domination() {
  const Experiment e = load("fecundity_coupled");
  if (e.config.algorithm != Algorithm::Coupled) return {false, "config is not coupled"};
  try {
    const Ensemble ens = run(e);
    double checks = 0, full = 0, births = 0;
    for (const auto& r : ens.runs) {
      checks += r.scalars.at("containment_checks");
      full += r.scalars.at("containment_full_checks");
      births += static_cast<double>(r.stats.accepted);
    }
    return {checks > 0 && full > 0,
            fmt("%zu runs to t=%g, %.0f event checks (%.0f full set comparisons), %.0f accepted births, 0 violations",
                ens.runs.size(), e.config.t_max, checks, full, births)};
  } catch (const CouplingViolation& ex) {
    return {false, std::string("violation: ") + ex.what()};
  }
}

Outcome density_bound() {
  const Experiment e = load("fecundity_density_bound");
  const Ensemble ens = run(e);
  const double b = e.model.global_bound();
  const double volB = std::pow(e.config.box_side, e.config.dim);
  const Summary s0 = summarize(ens.column("box_count", 0));
  const double bound = std::max(volB * b, s0.mean);
  bool pass = ens.times.size() == 64 && e.config.initial.lambda > b;
  double worst = -1e300;
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    const Summary s = summarize(ens.column("box_count", k));
    worst = std::max(worst, s.mean - (bound + kSigmas * s.se));
    pass = pass && s.mean <= bound + kSigmas * s.se;
  }
  return {pass, fmt("b=%.4f lambda=%g vol(B)b=%.3f E|eta0 in B|=%.3f, max(mean - bound - 3se)=%.3f over %zu times",
                    b, e.config.initial.lambda, volB * b, s0.mean, worst, ens.times.size())};
}

Outcome lyapunov_drift() {
  const Experiment e = load("fecundity_lyapunov_1d");
  const LyapunovSpec& spec = *e.lyapunov;
  const Ensemble ens = run(e);
  const DriftReport rep = drift_audit(ens.times, per_replicate(ens, "W"), spec.bconst, spec.h_mass, kSigmas);
  std::size_t failing = 0;
  for (const auto& r : rep.rows) failing += !r.pass;

  Rng rng(20261016, "lw-configs");
  std::size_t lw_fail = 0;
  double worst = -1e300;
  for (int trial = 0; trial < kLWConfigs; ++trial) {
    Configuration cfg(e.window, 1.0);
    const int n = static_cast<int>(rng.index(kLWMaxPoints + 1));
    const bool clustered = trial % 2 == 0;
    const double spread = rng.uniform(0.3, e.window.side / 2);
    for (int i = 0; i < n; ++i) {
      Point x = clustered ? spec.center : random_point(rng, e.window);
      if (clustered) x[0] += rng.uniform(-spread, spread);
      cfg.insert(e.window.canonical(x));
    }
    const LWResult r = LW_exact(cfg, e.model, spec);
    const double slack = r.value - (r.drift_bound + kLWQuadratureFactor * r.tolerance);
    worst = std::max(worst, slack);
    lw_fail += slack > 0.0;
  }
  return {rep.pass && lw_fail == 0,
          fmt("%zu reps, %zu/%zu times above e^{-t/2}EW0 + 2b<h> + 3se; limsup %.2f vs %.2f; "
              "LW_exact: %zu/%d configs violate, max(LW - bound - 10 tol)=%.3g",
              ens.runs.size(), failing, rep.rows.size(), rep.limsup_estimate, rep.limsup_bound, lw_fail, kLWConfigs,
              worst)};
}

Outcome mean_return_time() {
  const Experiment e = load("fecundity_return_1d");
  const LyapunovSpec& spec = *e.lyapunov;
  const double bh = spec.bconst * spec.h_mass;
  const Ensemble ens = run(e);
  std::vector<double> W0;
  const auto samples = return_samples(ens, *e.return_level, e.config.delta, W0);
  const ReturnTimeReport rep = return_time_audit(samples, W0, spec.bconst, spec.h_mass, e.config.theta, kSigmas);
  const bool level_ok = std::abs(*e.return_level - 4.0 * bh) <= 1e-9 * bh;
  return {level_ok && rep.mean_pass && rep.censored_fraction < kCensoredMax,
          fmt("K=%.3f=4b<h>, EW0=%.2f=%.2f b<h>, mean tau=%.4f (se %.4f) vs bound %.4f, censored %.4f", *e.return_level,
              rep.mean_W0, rep.mean_W0 / bh, rep.mean_tau, rep.se_tau, rep.mean_bound, rep.censored_fraction)};
}

Outcome exponential_moment() {
  const Experiment e = load("fecundity_expmoment_1d");
  const LyapunovSpec& spec = *e.lyapunov;
  const double bh = spec.bconst * spec.h_mass;
  const Ensemble ens = run(e);
  std::vector<double> W0;
  const auto samples = return_samples(ens, *e.return_level, e.config.delta, W0);
  const ReturnTimeReport rep = return_time_audit(samples, W0, spec.bconst, spec.h_mass, e.config.theta, kSigmas);
  const double threshold = (e.config.theta + bh) / (0.5 - e.config.theta);
  return {rep.exp_applicable && rep.exp_pass && std::isfinite(rep.mean_exp) && rep.censored == 0,
          fmt("theta=%g K=%.3f > %.3f, E e^{theta tau}=%.4f (se %.4f) vs EW0+1=%.2f, censored %zu", e.config.theta,
              *e.return_level, threshold, rep.mean_exp, rep.se_exp, rep.exp_bound, rep.censored)};
}

// Random clusters around x, then hill climbing from the best configuration
// found so far by moving, adding or removing one point.
double adversarial_search(const BirthModel& m, const Window& w, int budget, Rng& rng) {
  const double reach = m.interaction_radius();
  const int d = w.dim;
  auto build = [&](const std::vector<Point>& pts) {
    Configuration cfg(w, std::max(reach, 0.5));
    for (const auto& p : pts) cfg.insert(w.canonical(p));
    return cfg;
  };
  const Point x = random_point(rng, w);
  std::vector<Point> best;
  double best_rate = m.birth_rate_unchecked(x, build(best));
  double worst = best_rate;
  for (int trial = 0; trial < budget; ++trial) {
    std::vector<Point> pts;
    if (trial % 2 == 0 || best.empty()) {
      const std::size_t n = rng.index(kAdversarialMaxPoints + 1);
      const double spread = rng.uniform(0.05, 2.0) * std::max(reach, 1.0);
      const std::size_t clusters = 1 + rng.index(4);
      std::vector<Point> centers;
      for (std::size_t c = 0; c < clusters; ++c) {
        Point ctr = x;
        for (int k = 0; k < d; ++k) ctr[k] += rng.uniform(-reach, reach);
        centers.push_back(ctr);
      }
      for (std::size_t i = 0; i < n; ++i) {
        Point p = centers[i % clusters];
        for (int k = 0; k < d; ++k) p[k] += rng.uniform(-spread, spread);
        pts.push_back(p);
      }
    } else {
      pts = best;
      const double step = rng.uniform(0.01, 0.5) * std::max(reach, 1.0);
      const double u = rng.uniform();
      if (u < 0.2 && pts.size() < kAdversarialMaxPoints) {
        Point p = x;
        for (int k = 0; k < d; ++k) p[k] += rng.uniform(-reach, reach);
        pts.push_back(p);
      } else if (u < 0.3 && !pts.empty()) {
        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(rng.index(pts.size())));
      } else if (!pts.empty()) {
        Point& p = pts[rng.index(pts.size())];
        for (int k = 0; k < d; ++k) p[k] += rng.uniform(-step, step);
      }
    }
    const double b = m.birth_rate_unchecked(x, build(pts));
    worst = std::max(worst, b);
    if (b > best_rate) {
      best_rate = b;
      best = std::move(pts);
    }
  }
  return worst;
}

Outcome bound_tightness() {
  Rng rng(7, "adversarial");
  bool pass = true;
  std::string d;
  const std::vector<std::string> names = {"fecundity_demo", "fecundity_lyapunov_1d", "fecundity_density_bound"};
  constexpr int kStarts = 10;
  const int runs = static_cast<int>(names.size()) * kStarts;
  const int per_start = (kAdversarialConfigs + runs - 1) / runs;
  int total = 0;
  for (const auto& name : names) {
    const Experiment e = load(name);
    double worst = 0.0;
    // Several starting points x per model.
    for (int start = 0; start < kStarts; ++start)
      worst = std::max(worst, adversarial_search(e.model, e.window, per_start, rng));
    total += per_start * kStarts;
    const double b = e.model.global_bound();
    pass = pass && worst <= b;
    d += fmt("%s max b=%.4f <= %.4f; ", name.c_str(), worst, b);
  }

  LatticeBoundInput in;
  const double B = 1.0;
  in.b_f = [B](double s) { return B * std::pow(1.0 + s, -2.0); };
  in.tail = PowerTail{B, 2.0};
  in.alpha = 1.0;
  in.rho = 1.0;
  in.dim = 1;
  const double lattice = lattice_bound(in).bound;
  // B [3 + 2 sum_{k>=1} (1+k)^{-2}] summed independently
  double series = 3.0;
  for (long k = 2; k <= 20000000; ++k) series += 2.0 / (static_cast<double>(k) * static_cast<double>(k));
  series += 2.0 / 20000000.5;  // integral tail
  series *= B;
  const double closed = B * (1.0 + std::numbers::pi * std::numbers::pi / 3.0);
  const bool lattice_ok = std::abs(lattice - closed) <= kLatticeTol && std::abs(series - closed) <= kLatticeTol;
  return {pass && lattice_ok && total >= kAdversarialConfigs,
          d + fmt("%d configs; lattice %.12f vs B(1+pi^2/3)=%.12f (series %.12f)", total, lattice, closed, series)};
}

Outcome subcritical_extinction() {
  const Experiment sub = load("contact_subcritical");
  const Ensemble ens = run(sub);
  SupermartingaleInput in;
  in.times = ens.times;
  in.F = per_replicate(ens, "F");
  in.integral = per_replicate(ens, "cg_integral");
  for (const auto& r : ens.runs) in.extinct.push_back(r.series("population").back() == 0.0);
  const SupermartingaleReport rep = supermartingale_audit(in, kSigmas);

  const Experiment super = load("contact_supercritical");
  const Ensemble ens2 = run(super);
  SupermartingaleInput in2;
  in2.times = ens2.times;
  in2.F = per_replicate(ens2, "F");
  in2.integral = per_replicate(ens2, "cg_integral");
  for (const auto& r : ens2.runs) in2.extinct.push_back(r.series("population").back() == 0.0);
  const SupermartingaleReport neg = supermartingale_audit(in2, kSigmas);
  std::size_t neg_failing = 0;
  for (const auto& r : neg.rows) neg_failing += !r.pass;

  const bool pass = rep.pass && rep.extinction_fraction >= kExtinctionMin && rep.wilson_low >= kWilsonMin && !neg.pass;
  return {pass, fmt("<g>=%.2f: %zu reps, extinct %.4f (Wilson low %.4f), audit %s; control <g>=%.2f audit %s "
                    "(%zu/%zu times fail)",
                    sub.subcritical->g_mass, rep.replicates, rep.extinction_fraction, rep.wilson_low,
                    rep.pass ? "holds" : "fails", super.subcritical->g_mass, neg.pass ? "holds" : "fails",
                    neg_failing, neg.rows.size())};
}

Outcome fixpoint_certificate() {
  bool pass = true;
  std::string d;
  for (const std::string name : {"contact_fixpoint_1d", "contact_fixpoint_2d", "contact_fixpoint_3d"}) {
    const Experiment e = load(name);
    const auto& ref = e.supermartingale_reference;
    if (!ref || !ref->fixpoint) {
      pass = false;
      d += name + ": no fixpoint; ";
      continue;
    }
    const FixpointResult& f = *ref->fixpoint;
    const double mb = f.mass_balance_error();
    pass = pass && f.residual < kFixpointResidual && mb < kMassBalance;
    d += fmt("d=%d <c_g>=%.4f residual %.2e mass balance %.2e; ", f.dim, f.cg_mass_grid, f.residual, mb);
  }
  return {pass, d};
}

Outcome algorithm_cross_validation() {
  const Experiment e = load("fecundity_demo");
  const std::vector<double> times = {0.0, 1.0, 5.0};
  ExperimentConfig c = e.config;
  c.replicates = 2000;
  c.t_max = 5.0;
  const Experiment e2 = prepare(c);
  const Ensemble a = run(e2, times, Algorithm::Driver);
  const Ensemble b = run(e2, times, Algorithm::PerParent);
  bool pass = true;
  std::string d = fmt("%zu reps each; ", a.runs.size());
  for (std::size_t k = 1; k < times.size(); ++k) {
    const auto x = a.column("population", k), y = b.column("population", k);
    const TestResult t = welch_t_test(x, y);
    pass = pass && t.p_value > kWelchMin;
    d += fmt("t=%g driver %.3f per-parent %.3f p=%.3f; ", times[k], summarize(x).mean, summarize(y).mean, t.p_value);
  }
  return {pass, d};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("bdproc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(kConfigDir))
    if (entry.path().extension() == ".ini") configs.push_back(entry.path());
  std::sort(configs.begin(), configs.end());
  bool pass = !configs.empty();
  std::string d;
  std::ostringstream sink;
  for (const auto& cfg : configs) {
    const std::string stem = cfg.stem().string();
    const fs::path first = root / (stem + "_a"), second = root / (stem + "_b"), third = root / (stem + "_c");
    SimulateCommand s;
    s.config = cfg.string();
    s.replicates = std::min(load_config(cfg.string()).replicates, kDeterminismReplicates);
    s.out_dir = first.string();
    s.threads = 1;
    const int code = cmd_simulate(s, sink, sink);
    SimulateCommand again;
    again.config = (first / "manifest.json").string();
    again.out_dir = second.string();
    again.threads = 4;
    const int code2 = cmd_simulate(again, sink, sink);
    again.out_dir = third.string();
    again.threads = 1;
    const int code3 = cmd_simulate(again, sink, sink);
    const std::string obs = slurp(first / "observables.csv");
    const bool same = code == kExitOk && code2 == kExitOk && code3 == kExitOk && !obs.empty() &&
                      obs == slurp(second / "observables.csv") && obs == slurp(third / "observables.csv");
    pass = pass && same;
    if (!same) d += stem + " differs (exit " + std::to_string(code) + "/" + std::to_string(code2) + "); ";
  }
  fs::remove_all(root);
  return {pass, d + fmt("%zu configs, %zu replicates each, rerun twice from the manifest", configs.size(),
                        kDeterminismReplicates)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"surgailis density curve", surgailis_density},
      {"pathwise domination", pathwise_domination},
      {"density bound", density_bound},
      {"lyapunov drift", lyapunov_drift},
      {"mean return time", mean_return_time},
      {"exponential moment", exponential_moment},
      {"certified bound tightness", bound_tightness},
      {"subcritical extinction", subcritical_extinction},
      {"fixpoint certificate", fixpoint_certificate},
      {"algorithm cross-validation", algorithm_cross_validation},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  AC" << id << " " << criteria[i].first << " [" << fmt("%.1fs", secs)
              << "]: " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
