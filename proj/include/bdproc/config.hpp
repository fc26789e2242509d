#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bdproc/analysis.hpp"
#include "bdproc/engine.hpp"
#include "bdproc/lyapunov.hpp"

namespace bdproc {

// Malformed or inconsistent experiment configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string base_dir = ".";  // tabulated kernel paths are relative to this

  // [window]
  int dim = 2;
  double side = 10.0;
  Boundary boundary = Boundary::Periodic;

  // [model]
  std::string type = "surgailis";  // fecundity | establishment | glauber | surgailis | contact
  std::string a, phi, c, g;        // kernel specifications
  double z = 1.0;                  // glauber activity
  double rate = 1.0;               // surgailis birth rate
  double eps = 1.0;                // G(x) = (1+|x|)^{-d-eps}
  std::optional<double> floor_alpha, floor_rho;
  double condition_spacing = 1e-3;

  // [lyapunov]
  bool lyapunov = false;
  std::optional<double> beta0, beta1;
  std::optional<double> return_level;   // absolute K
  std::optional<double> return_factor;  // K = factor * b<h>
  double delta = 0.1;
  double theta = 0.25;
  int radial_nodes = 256;
  int angular_nodes = 64;

  // [run]
  double t_max = 10.0;
  std::size_t replicates = 1;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::Driver;
  int samples = 64;
  InitialState initial;
  double box_side = 2.0;
  bool record_events = false;
  bool full_containment_check = false;
  bool supermartingale = false;       // attach F / <c_g> observers (contact-type models)
  std::string supermartingale_g;      // build f from this kernel instead of the model's g
  std::optional<double> lifetimes_born_before;
  unsigned threads = 0;               // does not affect any output

  // [output]
  std::string output_dir = "out";
};

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);

nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Everything certified from a configuration.
struct Experiment {
  ExperimentConfig config;
  Window window;
  BirthModel model;
  std::optional<LyapunovSpec> lyapunov;
  std::optional<double> return_level;
  std::optional<SubcriticalReport> subcritical;
  // Kernel and c_g / f used by the supermartingale observer.
  std::optional<SubcriticalReport> supermartingale_reference;
  nlohmann::json certificates;
  std::string certificate_text;
};

// Certifies bounds (and, when requested, the Lyapunov triple and the
// subcritical pipeline). Throws CertificationError on a failed condition and
// ConfigError on inconsistent input.
Experiment prepare(const ExperimentConfig& c);

SimParams sim_params(const Experiment& e);
// Observers in column order: population, box_count, [W], [F, cg_integral], [lifetimes].
ObserverFactory observer_factory(const Experiment& e);

}  // namespace bdproc
