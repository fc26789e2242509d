#include "bdproc/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <queue>
#include <thread>

#include "bdproc/stats.hpp"

namespace bdproc {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Driver: return "driver";
    case Algorithm::PerParent: return "per-parent";
    case Algorithm::Coupled: return "coupled";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "driver") return Algorithm::Driver;
  if (s == "per-parent") return Algorithm::PerParent;
  if (s == "coupled") return Algorithm::Coupled;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected driver, per-parent or coupled)");
}

std::vector<double> default_schedule(double t_max, int n) {
  if (t_max <= 0.0 || n <= 1) return {0.0};
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = t_max * i / (n - 1);
  out.back() = t_max;
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Point uniform_point(const Window& w, Rng& rng) {
  Point p{0.0, 0.0, 0.0};
  for (int k = 0; k < w.dim; ++k) p[k] = rng.uniform(0.0, w.side);
  return p;
}

double cell_size_for(const SimParams& p) {
  const double r = p.model.interaction_radius();
  return r > 0.0 ? r : p.window.side;
}

struct Death {
  double t;
  std::uint64_t seq;
  ParticleId id;
  bool operator>(const Death& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class DeathQueue {
 public:
  void push(double t, ParticleId id) { q_.push(Death{t, seq_++, id}); }
  double next_time() const { return q_.empty() ? kInf : q_.top().t; }
  Death pop() {
    Death d = q_.top();
    q_.pop();
    return d;
  }

 private:
  std::priority_queue<Death, std::vector<Death>, std::greater<>> q_;
  std::uint64_t seq_ = 0;
};

// Named substreams of one run seed. A coupled run shares all of them between
// the two processes.
struct Streams {
  explicit Streams(std::uint64_t seed)
      : times(seed, "proposal-times"),
        locations(seed, "locations"),
        marks(seed, "u-marks"),
        lifetimes(seed, "lifetimes"),
        initial(seed, "initial-state"),
        initial_lifetimes(seed, "initial-lifetimes"),
        parents(seed, "parents") {}
  Rng times, locations, marks, lifetimes, initial, initial_lifetimes, parents;
};

std::vector<Point> initial_points(const SimParams& p, Rng& rng) {
  const Window& w = p.window;
  std::vector<Point> pts;
  switch (p.initial.kind) {
    case InitialState::Kind::Empty: break;
    case InitialState::Kind::Poisson: {
      if (!(p.initial.lambda >= 0.0)) throw SimulationError("Poisson initial intensity must be >= 0");
      const std::uint64_t n = rng.poisson(p.initial.lambda * w.volume());
      for (std::uint64_t i = 0; i < n; ++i) pts.push_back(uniform_point(w, rng));
      break;
    }
    case InitialState::Kind::Uniform:
      for (std::size_t i = 0; i < p.initial.count; ++i) pts.push_back(uniform_point(w, rng));
      break;
    case InitialState::Kind::Explicit:
      for (Point x : p.initial.points) {
        if (w.boundary == Boundary::Free && !w.contains(x)) {
          throw SimulationError("explicit initial point lies outside the free window");
        }
        pts.push_back(w.canonical(x));
      }
      break;
  }
  return pts;
}

// Observer fan-out plus the fixed sampling schedule.
class Recorder {
 public:
  Recorder(EventLog& log, ObserverSet& obs, std::vector<double> times, bool record)
      : log_(log), obs_(obs), record_(record) {
    log_.sample_times = std::move(times);
    for (auto& o : obs_)
      for (auto& n : o->names()) log_.names.push_back(n);
    log_.samples.assign(log_.names.size(), {});
    for (auto& s : log_.samples) s.reserve(log_.sample_times.size());
  }

  std::size_t pending() const { return next_; }
  bool has_sample_before(double t, double t_max) const {
    return next_ < log_.sample_times.size() && log_.sample_times[next_] < t && log_.sample_times[next_] <= t_max;
  }
  double next_sample_time() const { return log_.sample_times[next_]; }

  void start(const Configuration& cfg) {
    for (auto& o : obs_) o->start(cfg);
  }
  void take_sample(const Configuration& cfg) {
    const double ts = log_.sample_times[next_++];
    row_.clear();
    for (auto& o : obs_) {
      o->advance(cfg, ts);
      o->sample(cfg, ts, row_);
    }
    for (std::size_t i = 0; i < row_.size(); ++i) log_.samples[i].push_back(row_[i]);
  }
  void advance(const Configuration& cfg, double t) {
    for (auto& o : obs_) o->advance(cfg, t);
  }
  void birth(const Configuration& after, ParticleId id, const Point& x, double t, std::optional<ParticleId> parent) {
    for (auto& o : obs_) o->on_birth(after, id, x, t);
    if (record_) log_.events.push_back(Event{t, EventKind::Birth, id, x, parent, 0});
  }
  void death(const Configuration& before, ParticleId id, const Point& x, double t) {
    for (auto& o : obs_) o->on_death(before, id, x, t);
    if (record_) log_.events.push_back(Event{t, EventKind::Death, id, x, std::nullopt, 0});
  }
  void finish(const Configuration& cfg, double t_end) {
    log_.t_end = t_end;
    for (auto& o : obs_) o->finish(cfg, t_end, log_);
  }

 private:
  EventLog& log_;
  ObserverSet& obs_;
  bool record_;
  std::size_t next_ = 0;
  std::vector<double> row_;
};

std::vector<double> schedule_for(const SimParams& p) {
  if (p.sample_times.empty()) return default_schedule(p.t_max);
  std::vector<double> s = p.sample_times;
  if (!std::is_sorted(s.begin(), s.end())) throw SimulationError("sample times must be sorted");
  if (s.front() < 0.0 || s.back() > p.t_max) throw SimulationError("sample times must lie in [0, t_max]");
  return s;
}

void check_params(const SimParams& p) {
  if (!(p.t_max >= 0.0)) throw SimulationError("t_max must be >= 0");
  const int md = p.model.dim();
  if (md != 0 && md != p.window.dim) {
    throw SimulationError("model kernels are " + std::to_string(md) + "-dimensional but the window has d=" +
                          std::to_string(p.window.dim));
  }
}

// Shared next-event loop for the single-process algorithms. `proposal_time`
// returns the time of the next birth proposal given the current time;
// `propose` handles one proposal at time t.
template <class NextProposal, class Propose>
EventLog single_process_loop(const SimParams& p, Streams& rs, ObserverSet& obs, NextProposal&& proposal_time,
                             Propose&& propose) {
  check_params(p);
  EventLog log;
  Recorder rec(log, obs, schedule_for(p), p.record_events);
  Configuration cfg(p.window, cell_size_for(p));
  DeathQueue deaths;
  for (const Point& x : initial_points(p, rs.initial)) {
    const ParticleId id = cfg.insert(x);
    deaths.push(rs.initial_lifetimes.exponential(), id);
    rec.birth(cfg, id, x, 0.0, std::nullopt);
  }
  rec.start(cfg);
  double t = 0.0;
  for (;;) {
    const double t_prop = proposal_time(t, cfg);
    const double t_death = deaths.next_time();
    const double t_ev = std::min(t_prop, t_death);
    while (rec.has_sample_before(t_ev, p.t_max)) rec.take_sample(cfg);
    if (t_ev > p.t_max) break;
    rec.advance(cfg, t_ev);
    t = t_ev;
    if (t_death <= t_prop) {
      const Death d = deaths.pop();
      const Point x = cfg.position(d.id);
      rec.death(cfg, d.id, x, t);
      cfg.remove(d.id);
      ++log.stats.deaths;
    } else {
      ++log.stats.proposals;
      propose(t, cfg, deaths, rec, log.stats);
    }
  }
  rec.finish(cfg, p.t_max);
  return log;
}

}  // namespace

Configuration sample_poisson_field(double lambda, const Window& w, double cell_size, Rng& rng) {
  if (!(lambda >= 0.0)) throw SimulationError("Poisson intensity must be >= 0");
  Configuration cfg(w, cell_size);
  const std::uint64_t n = rng.poisson(lambda * w.volume());
  for (std::uint64_t i = 0; i < n; ++i) cfg.insert(uniform_point(w, rng));
  return cfg;
}

EventLog run_driver(const SimParams& p, std::uint64_t seed, ObserverSet& obs) {
  if (!p.model.has_global()) {
    throw SimulationError("the driver algorithm needs a global birth-rate bound; " + p.model.name() +
                          " has none (use per-parent)");
  }
  const double bconst = p.model.global_bound();
  const double rate = bconst * p.window.volume();
  Streams rs(seed);
  // The driver's proposal times form a fixed Poisson process independent of the state.
  double t_prop = rate > 0.0 ? rs.times.exponential(rate) : kInf;
  auto next = [&](double, const Configuration&) { return t_prop; };
  auto propose = [&](double t, Configuration& cfg, DeathQueue& deaths, Recorder& rec, ProposalStats& st) {
    const Point x = uniform_point(p.window, rs.locations);
    const double u = bconst * rs.marks.uniform();
    const double r = rs.lifetimes.exponential();
    t_prop = t + rs.times.exponential(rate);
    if (u < p.model.birth_rate(x, cfg)) {
      const ParticleId id = cfg.insert(x);
      deaths.push(t + r, id);
      rec.birth(cfg, id, x, t, std::nullopt);
      ++st.accepted;
    } else {
      ++st.rejected;
    }
  };
  return single_process_loop(p, rs, obs, next, propose);
}

EventLog run_per_parent(const SimParams& p, std::uint64_t seed, ObserverSet& obs) {
  if (!p.model.has_per_parent()) {
    throw SimulationError("the per-parent algorithm needs a per-parent decomposition; " + p.model.name() +
                          " has none (use driver)");
  }
  const double env = p.model.per_parent_bound();
  const RadialSampler sampler = env > 0.0 ? RadialSampler(p.model.dispersal()) : RadialSampler();
  const Window& w = p.window;
  Streams rs(seed);
  // Total proposal intensity env * |eta| changes with every event; by
  // memorylessness the next proposal time is redrawn after each one.
  auto next = [&](double t, const Configuration& cfg) {
    const double rate = env * static_cast<double>(cfg.size());
    return rate > 0.0 ? t + rs.times.exponential(rate) : kInf;
  };
  auto propose = [&](double t, Configuration& cfg, DeathQueue& deaths, Recorder& rec, ProposalStats& st) {
    const std::size_t k = rs.parents.index(cfg.size());
    const ParticleId parent = cfg.ids()[k];
    const Point y = cfg.points()[k];
    const Vec dv = sampler.sample(rs.locations);
    const double u = rs.marks.uniform();
    const double r = rs.lifetimes.exponential();
    Point x = y;
    for (int i = 0; i < w.dim; ++i) x[i] += dv[i];
    bool accept = false;
    if (w.boundary == Boundary::Periodic || w.contains(x)) {
      x = w.canonical(x);
      accept = u < p.model.parent_acceptance(parent, x, cfg);
    }
    if (accept) {
      const ParticleId id = cfg.insert(x);
      deaths.push(t + r, id);
      rec.birth(cfg, id, x, t, parent);
      ++st.accepted;
    } else {
      ++st.rejected;
    }
  };
  return single_process_loop(p, rs, obs, next, propose);
}

CoupledLog run_coupled(const SimParams& p, std::uint64_t seed, ObserverSet& obs) {
  if (!p.model.has_global()) {
    throw SimulationError("coupled runs need a global birth-rate bound; " + p.model.name() + " has none");
  }
  check_params(p);
  const double bconst = p.model.global_bound();
  const double rate = bconst * p.window.volume();
  Streams rs(seed);
  CoupledLog out;
  const std::vector<double> times = schedule_for(p);
  Recorder rec(out.eta, obs, times, p.record_events);
  out.xi.sample_times = times;
  out.xi.names = {"population"};
  out.xi.samples.assign(1, {});

  const double cs = cell_size_for(p);
  Configuration eta(p.window, cs), xi(p.window, cs);
  DeathQueue deaths;
  ParticleId next_id = 0;
  std::uint64_t rejected_alive = 0;

  auto log_xi = [&](double t, EventKind kind, ParticleId id, const Point& x) {
    if (p.record_events) out.xi.events.push_back(Event{t, kind, id, x, std::nullopt, 1});
  };
  auto check_atom = [&](ParticleId id) {
    ++out.containment_checks;
    if (eta.size() + rejected_alive != xi.size()) {
      throw CouplingViolation("coupled run: |xi| - |eta| differs from the rejected-and-alive count");
    }
    if (eta.contains(id) && (!xi.contains(id) || eta.position(id) != xi.position(id))) {
      throw CouplingViolation("coupled run: atom " + std::to_string(id) + " is in eta but not in xi");
    }
  };
  auto check_all = [&] {
    ++out.full_checks;
    const auto& ids = eta.ids();
    const auto& pts = eta.points();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!xi.contains(ids[i]) || xi.position(ids[i]) != pts[i]) {
        throw CouplingViolation("coupled run: eta is not contained in xi (atom " + std::to_string(ids[i]) + ")");
      }
    }
  };
  auto sample = [&] {
    check_all();
    out.xi.samples[0].push_back(static_cast<double>(xi.size()));
    rec.take_sample(eta);
  };

  for (const Point& x : initial_points(p, rs.initial)) {
    const ParticleId id = next_id++;
    eta.insert_with_id(id, x);
    xi.insert_with_id(id, x);
    deaths.push(rs.initial_lifetimes.exponential(), id);
    rec.birth(eta, id, x, 0.0, std::nullopt);
    log_xi(0.0, EventKind::Birth, id, x);
  }
  rec.start(eta);
  double t_prop = rate > 0.0 ? rs.times.exponential(rate) : kInf;
  for (;;) {
    const double t_death = deaths.next_time();
    const double t_ev = std::min(t_prop, t_death);
    while (rec.has_sample_before(t_ev, p.t_max)) sample();
    if (t_ev > p.t_max) break;
    rec.advance(eta, t_ev);
    const double t = t_ev;
    ParticleId changed;
    if (t_death <= t_prop) {
      const Death d = deaths.pop();
      changed = d.id;
      const Point x = xi.position(d.id);
      if (eta.contains(d.id)) {
        rec.death(eta, d.id, x, t);
        eta.remove(d.id);
        ++out.eta.stats.deaths;
      } else {
        --rejected_alive;
      }
      xi.remove(d.id);
      log_xi(t, EventKind::Death, d.id, x);
      ++out.xi.stats.deaths;
    } else {
      const Point x = uniform_point(p.window, rs.locations);
      const double u = bconst * rs.marks.uniform();
      const double r = rs.lifetimes.exponential();
      t_prop = t + rs.times.exponential(rate);
      const ParticleId id = next_id++;
      changed = id;
      ++out.eta.stats.proposals;
      ++out.xi.stats.proposals;
      ++out.xi.stats.accepted;
      const bool accept = u < p.model.birth_rate(x, eta);
      xi.insert_with_id(id, x);
      log_xi(t, EventKind::Birth, id, x);
      deaths.push(t + r, id);
      if (accept) {
        eta.insert_with_id(id, x);
        rec.birth(eta, id, x, t, std::nullopt);
        ++out.eta.stats.accepted;
      } else {
        ++rejected_alive;
        out.rejected_alive_max = std::max(out.rejected_alive_max, rejected_alive);
        ++out.eta.stats.rejected;
      }
    }
    check_atom(changed);
    if (p.full_containment_check) check_all();
  }
  rec.finish(eta, p.t_max);
  out.xi.t_end = p.t_max;
  return out;
}

EventLog simulate(const SimParams& p, std::uint64_t seed, ObserverSet& obs) {
  switch (p.algorithm) {
    case Algorithm::Driver: return run_driver(p, seed, obs);
    case Algorithm::PerParent: return run_per_parent(p, seed, obs);
    case Algorithm::Coupled: break;
  }
  CoupledLog c = run_coupled(p, seed, obs);
  EventLog log = std::move(c.eta);
  log.names.push_back("xi_population");
  log.samples.push_back(std::move(c.xi.samples[0]));
  if (p.record_events) {
    std::vector<Event> merged;
    merged.reserve(log.events.size() + c.xi.events.size());
    std::merge(log.events.begin(), log.events.end(), c.xi.events.begin(), c.xi.events.end(),
               std::back_inserter(merged), [](const Event& a, const Event& b) { return a.t < b.t; });
    log.events = std::move(merged);
  }
  log.scalars["containment_checks"] = static_cast<double>(c.containment_checks);
  log.scalars["containment_full_checks"] = static_cast<double>(c.full_checks);
  log.scalars["xi_proposals"] = static_cast<double>(c.xi.stats.proposals);
  return log;
}

// ---------------------------------------------------------------------------

std::vector<double> Ensemble::column(const std::string& name, std::size_t k) const {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const EventLog& r : runs) out.push_back(r.series(name).at(k));
  return out;
}

Ensemble run_replicates(const SimParams& p, std::size_t n, std::uint64_t base_seed, const ObserverFactory& factory,
                        unsigned threads) {
  if (n == 0) throw SimulationError("need at least one replicate");
  Ensemble ens;
  ens.runs.resize(n);
  ens.seeds.resize(n);
  for (std::size_t i = 0; i < n; ++i) ens.seeds[i] = replicate_seed(base_seed, i);

  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        ObserverSet obs = factory ? factory() : ObserverSet{};
        ens.runs[i] = simulate(p, ens.seeds[i], obs);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned nt = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, n));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < nt; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ens.names = ens.runs.front().names;
  ens.times = ens.runs.front().sample_times;
  for (std::size_t c = 0; c < ens.names.size(); ++c) {
    SeriesSummary s;
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      Welford acc;
      for (const EventLog& r : ens.runs) acc.add(r.samples[c][k]);
      s.mean.push_back(acc.mean());
      s.variance.push_back(acc.variance());
      s.se.push_back(acc.stderr_mean());
    }
    ens.summary[ens.names[c]] = std::move(s);
  }
  return ens;
}

}  // namespace bdproc
