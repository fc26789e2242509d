#pragma once

#include <functional>
#include <optional>
#include <unordered_map>

#include "bdproc/engine.hpp"
#include "bdproc/lyapunov.hpp"

namespace bdproc {

// "population": |eta_t|
class PopulationObserver : public Observer {
 public:
  std::vector<std::string> names() const override { return {"population"}; }
  void sample(const Configuration& cfg, double, std::vector<double>& out) override {
    out.push_back(static_cast<double>(cfg.size()));
  }
};

// "box_count": |eta_t ∩ B| for the axis-aligned box B of the given side
// centered at `center` (min-image under Periodic).
class BoxCountObserver : public Observer {
 public:
  BoxCountObserver(double side, Point center) : side_(side), center_(center) {}
  std::vector<std::string> names() const override { return {"box_count"}; }
  void sample(const Configuration& cfg, double, std::vector<double>& out) override;

 private:
  double side_;
  Point center_;
};

// "W": the Lyapunov functional, updated incrementally at every event and
// recomputed exactly at sample times on small states. With a return level it also tracks
// tau_K and reports scalars tau_K, tau_censored and W0.
class LyapunovObserver : public Observer {
 public:
  struct ReturnLevel {
    double K = 0.0;
    double delta = 0.1;
  };
  LyapunovObserver(const LyapunovSpec& spec, std::optional<ReturnLevel> level, double t_max);
  std::vector<std::string> names() const override { return {"W"}; }
  void start(const Configuration& cfg) override;
  void on_birth(const Configuration& after, ParticleId id, const Point& x, double t) override;
  void on_death(const Configuration& before, ParticleId id, const Point& x, double t) override;
  void sample(const Configuration& cfg, double t, std::vector<double>& out) override;
  void finish(const Configuration& cfg, double t_end, EventLog& log) override;

 private:
  LyapunovSpec spec_;
  std::optional<ReturnTimeTracker> tracker_;
  double W_ = 0.0;
  double W0_ = 0.0;
};

// "F" = sum_x f(|x - center|) and "cg_integral" = int_0^t <c_g, eta_s> ds
// with <c_g, eta> = sum_x c_g(|x - center|).
class SupermartingaleObserver : public Observer {
 public:
  SupermartingaleObserver(std::function<double(double)> f, std::function<double(double)> cg, const Window& w,
                          Point center);
  std::vector<std::string> names() const override { return {"F", "cg_integral"}; }
  void start(const Configuration& cfg) override;
  void advance(const Configuration& cfg, double t) override;
  void on_birth(const Configuration& after, ParticleId id, const Point& x, double t) override;
  void on_death(const Configuration& before, ParticleId id, const Point& x, double t) override;
  void sample(const Configuration& cfg, double t, std::vector<double>& out) override;

 private:
  double radius(const Point& x) const { return distance(x, center_, window_); }
  std::function<double(double)> f_, cg_;
  Window window_;
  Point center_;
  double F_ = 0.0, C_ = 0.0, integral_ = 0.0, t_ = 0.0;
};

// Records the age at death of every particle born in (0, born_before] into
// records["lifetimes"]; scalars["lifetimes_censored"] counts those still alive
// at the end.
class LifetimeObserver : public Observer {
 public:
  explicit LifetimeObserver(double born_before) : born_before_(born_before) {}
  std::vector<std::string> names() const override { return {}; }
  void on_birth(const Configuration&, ParticleId id, const Point&, double t) override;
  void on_death(const Configuration&, ParticleId id, const Point&, double t) override;
  void sample(const Configuration&, double, std::vector<double>&) override {}
  void finish(const Configuration&, double t_end, EventLog& log) override;

 private:
  double born_before_;
  std::unordered_map<ParticleId, double> born_;
  std::vector<double> ages_;
};

}  // namespace bdproc
