#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bdproc/geometry.hpp"

namespace bdproc {

enum class EventKind { Birth, Death };

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::Birth;
  ParticleId id = 0;
  Point x{0.0, 0.0, 0.0};
  std::optional<ParticleId> parent;
  int proc = 0;  // 0: the process, 1: the dominating process of a coupled run
};

struct ProposalStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t deaths = 0;
};

// Ordered events plus observables sampled on a fixed schedule. Initial
// particles are logged as births at t = 0 without a parent.
struct EventLog {
  std::vector<Event> events;  // empty unless recording was requested
  std::vector<std::string> names;
  std::vector<double> sample_times;
  std::vector<std::vector<double>> samples;  // samples[name][time]
  ProposalStats stats;
  double t_end = 0.0;
  // Per-run results that are not time series (return times, lifetimes).
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> records;

  // Index of an observable name, or throws.
  std::size_t column(const std::string& name) const;
  const std::vector<double>& series(const std::string& name) const { return samples[column(name)]; }
};

// Applies the events of process `proc` up to and including time t.
Configuration replay(const EventLog& log, const Window& w, double cell_size, double t, int proc = 0);

}  // namespace bdproc
