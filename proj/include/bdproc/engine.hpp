#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bdproc/events.hpp"
#include "bdproc/geometry.hpp"
#include "bdproc/rates.hpp"
#include "bdproc/rng.hpp"

namespace bdproc {

enum class Algorithm { Driver, PerParent, Coupled };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct InitialState {
  enum class Kind { Empty, Poisson, Explicit, Uniform };
  Kind kind = Kind::Empty;
  double lambda = 0.0;          // Poisson
  std::size_t count = 0;        // Uniform: exactly `count` i.i.d. uniform points
  std::vector<Point> points;    // Explicit
};

// Hooks called by the engines on the observed process (eta). Observers are
// stateful and belong to one run.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual std::vector<std::string> names() const = 0;
  // Initial configuration, t = 0.
  virtual void start(const Configuration&) {}
  // The state has been constant since the previous call; time is now t.
  virtual void advance(const Configuration&, double /*t*/) {}
  virtual void on_birth(const Configuration& /*after*/, ParticleId, const Point&, double /*t*/) {}
  virtual void on_death(const Configuration& /*before*/, ParticleId, const Point&, double /*t*/) {}
  // Appends one value per name.
  virtual void sample(const Configuration& cfg, double t, std::vector<double>& out) = 0;
  virtual void finish(const Configuration&, double /*t_end*/, EventLog&) {}
};

using ObserverSet = std::vector<std::unique_ptr<Observer>>;
using ObserverFactory = std::function<ObserverSet()>;

struct SimParams {
  Window window;
  BirthModel model;
  double t_max = 10.0;
  InitialState initial;
  Algorithm algorithm = Algorithm::Driver;
  std::vector<double> sample_times;  // empty: default_schedule(t_max)
  bool record_events = false;
  // Coupled runs: compare the full point sets after every event instead of
  // only the changed atom (the full sets are always compared at sample times).
  bool full_containment_check = false;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The domination invariant of a coupled run failed.
class CouplingViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// n uniform times on [0, t_max], both ends included (one point when t_max = 0).
std::vector<double> default_schedule(double t_max, int n = 64);

Configuration sample_poisson_field(double lambda, const Window& w, double cell_size, Rng& rng);

EventLog run_driver(const SimParams& p, std::uint64_t seed, ObserverSet& obs);
EventLog run_per_parent(const SimParams& p, std::uint64_t seed, ObserverSet& obs);

struct CoupledLog {
  EventLog eta;  // observers attach here
  EventLog xi;   // the dominating Surgailis process; samples "population"
  std::uint64_t containment_checks = 0;
  std::uint64_t full_checks = 0;
  std::uint64_t rejected_alive_max = 0;
};

// eta thins the shared driver by u <= b(x, eta); xi accepts every proposal.
CoupledLog run_coupled(const SimParams& p, std::uint64_t seed, ObserverSet& obs);

// Dispatches on p.algorithm; a coupled run returns its eta log.
EventLog simulate(const SimParams& p, std::uint64_t seed, ObserverSet& obs);

struct SeriesSummary {
  std::vector<double> mean, variance, se;
};

struct Ensemble {
  std::vector<std::string> names;
  std::vector<double> times;
  std::vector<std::uint64_t> seeds;
  std::vector<EventLog> runs;                // index order
  std::map<std::string, SeriesSummary> summary;

  // Replicate values of an observable at sample index k.
  std::vector<double> column(const std::string& name, std::size_t k) const;
};

// Replicate i runs with replicate_seed(base_seed, i). Runs are spread over
// `threads` workers (0: hardware concurrency) and reduced in index order.
Ensemble run_replicates(const SimParams& p, std::size_t n, std::uint64_t base_seed, const ObserverFactory& factory,
                        unsigned threads = 0);

}  // namespace bdproc
