#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bdproc/events.hpp"
#include "bdproc/geometry.hpp"
#include "bdproc/kernels.hpp"
#include "bdproc/rates.hpp"

namespace bdproc {

class LyapunovError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// K(q) = q^{-beta0} for q <= 1, q^{-beta1} for q > 1.
struct PairKernel {
  double beta0 = 0.5;
  double beta1 = 2.0;
  double operator()(double q) const { return q <= 1.0 ? real_pow(q, -beta0) : real_pow(q, -beta1); }
};

PairKernel default_pair_kernel(int dim);

struct C1Result {
  double value = 0.0;  // Richardson-extrapolated sup over the evaluation points
  double error = 0.0;  // |fine - coarse| / 3
  double coarse = 0.0;
  double fine = 0.0;
  Point argmax{0.0, 0.0, 0.0};
};

struct C1Options {
  int radial_nodes = 256;   // per radial segment, coarse level
  int angular_nodes = 64;   // polar angle (d=2) or azimuth (d=3), coarse level
  // Evaluation points for the sup; defaults to the window center plus a
  // 3^d lattice of interior points.
  std::vector<Point> points;
};

// sup_x int phi(y) K(|x - y|) dy. Periodic windows integrate over the torus;
// Free windows over all of R^d (an upper bound for the window).
C1Result certify_C1(const std::function<double(const Point&)>& phi, const PairKernel& K, const Window& w,
                    const C1Options& opt = {});

// The triple (K, phi, h) with phi = c G and h = G, both centered at the
// window center, and c fixed by 2 C1 b phi = h.
struct LyapunovSpec {
  Window window;
  GWeight gw;
  PairKernel K;
  Point center{0.0, 0.0, 0.0};
  double c = 0.0;
  double C_G = 0.0;        // certified sup_x int G(y) K(|x-y|) dy (value + error)
  double C_G_error = 0.0;
  double C1 = 0.0;         // c * C_G
  double bconst = 0.0;
  double h_mass = 0.0;     // <h> over the window

  double h(const Point& x) const { return gw(distance(x, center, window)); }
  double phi(const Point& x) const { return c * h(x); }
};

LyapunovSpec calibrate_spec(double bconst, const PairKernel& K, const GWeight& gw, const Window& w,
                            const C1Options& opt = {});

// int_window G(|x - center|) dx
double window_h_mass(const GWeight& gw, const Window& w);

double pair_potential(const Point& x, const Point& y, const LyapunovSpec& spec);
double W_value(const Configuration& cfg, const LyapunovSpec& spec);
// h(x) + sum_y psi(x, y): the change of W when x is added (or removed).
double W_increment(const Point& x, const Configuration& cfg, const LyapunovSpec& spec,
                   std::optional<ParticleId> exclude = std::nullopt);

struct LWResult {
  double value = 0.0;
  double tolerance = 0.0;   // quadrature error estimate (two grid levels, or 3 SE for Monte Carlo)
  double W = 0.0;
  double drift_bound = 0.0; // b<h> - W/2
  double abs_bound = 0.0;   // b<h> + 2W
  double death_part = 0.0;  // -sum h - 2V
  double birth_h = 0.0;     // int b h
  double birth_psi = 0.0;   // sum_y int b psi(., y)
};

struct LWOptions {
  int grid = 128;         // cells per axis for int b h (d <= 2)
  int radial_nodes = 128; // per radial segment for the psi integrals
  int angular_nodes = 32;
  std::size_t mc_samples = 1 << 16;  // d = 3
  std::uint64_t seed = 1;
};

LWResult LW_exact(const Configuration& cfg, const BirthModel& model, const LyapunovSpec& spec,
                  const LWOptions& opt = {});

struct ReturnTimeSample {
  double K_level = 0.0;
  double delta = 0.0;
  double tau = 0.0;
  bool censored = false;
};

// Tracks W along a trajectory and records the first time after delta at
// which it is below K_level.
class ReturnTimeTracker {
 public:
  ReturnTimeTracker(double K_level, double delta, double t_max)
      : sample_{K_level, delta, t_max, true}, t_max_(t_max) {}
  // W after an event at time t (or the initial value at t = 0).
  void update(double t, double W);
  // Call once the run reaches t_max.
  void finish(double W_at_end);
  const ReturnTimeSample& sample() const { return sample_; }
  bool done() const { return done_; }

 private:
  ReturnTimeSample sample_;
  double t_max_;
  double last_W_ = 0.0;
  bool checked_delta_ = false;
  bool done_ = false;
};

// Replays a recorded event log (process 0) and extracts tau_K.
ReturnTimeSample tau_K(const EventLog& log, const LyapunovSpec& spec, double K_level, double delta);

struct DriftRow {
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double bound = 0.0;  // e^{-t/2} E W_0 + 2 b <h>
  bool pass = true;
};

struct DriftReport {
  std::vector<DriftRow> rows;
  bool pass = true;
  double limsup_estimate = 0.0;  // mean over the last quarter of the sample times
  double limsup_bound = 0.0;     // 2 b <h>
};

// W_samples[replicate][time]
DriftReport drift_audit(const std::vector<double>& times, const std::vector<std::vector<double>>& W_samples,
                        double bconst, double h_mass, double sigmas = 3.0);

struct ReturnTimeReport {
  std::size_t replicates = 0;
  std::size_t censored = 0;
  double censored_fraction = 0.0;
  double mean_W0 = 0.0;
  double mean_tau = 0.0;
  double se_tau = 0.0;
  double mean_bound = 0.0;  // E W_0 / (K - b<h>)
  bool mean_pass = false;
  double theta = 0.25;
  double mean_exp = 0.0;    // E e^{theta tau}
  double se_exp = 0.0;
  double exp_bound = 0.0;   // E W_0 + 1
  bool exp_applicable = false;  // K above (theta + b<h>)/(1/2 - theta)
  bool exp_pass = false;
};

ReturnTimeReport return_time_audit(const std::vector<ReturnTimeSample>& samples, const std::vector<double>& W0,
                                   double bconst, double h_mass, double theta = 0.25, double sigmas = 3.0);

}  // namespace bdproc
