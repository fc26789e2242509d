#include "bdproc/observers.hpp"

#include <cmath>

namespace bdproc {

void BoxCountObserver::sample(const Configuration& cfg, double, std::vector<double>& out) {
  const Window& w = cfg.window();
  const double h = 0.5 * side_;
  std::size_t n = 0;
  for (const Point& x : cfg.points()) {
    const Vec dv = min_image_displacement(center_, x, w);
    bool in = true;
    for (int k = 0; k < w.dim; ++k) in = in && std::abs(dv[k]) <= h;
    n += in ? 1 : 0;
  }
  out.push_back(static_cast<double>(n));
}

// ---------------------------------------------------------------------------

LyapunovObserver::LyapunovObserver(const LyapunovSpec& spec, std::optional<ReturnLevel> level, double t_max)
    : spec_(spec) {
  if (level) tracker_.emplace(level->K, level->delta, t_max);
}

void LyapunovObserver::start(const Configuration& cfg) {
  W_ = W_value(cfg, spec_);
  W0_ = W_;
  if (tracker_) tracker_->update(0.0, W_);
}

void LyapunovObserver::on_birth(const Configuration& after, ParticleId id, const Point& x, double t) {
  if (t == 0.0) return;  // initial particles are counted in start()
  W_ += W_increment(x, after, spec_, id);
  if (tracker_) tracker_->update(t, W_);
}

void LyapunovObserver::on_death(const Configuration& before, ParticleId id, const Point& x, double t) {
  W_ -= W_increment(x, before, spec_, id);
  if (tracker_) tracker_->update(t, W_);
}

namespace {
// Exact O(n^2) resync of the running W is only done on small states; on large
// ones the incremental value is used (its round-off is far below sampling noise).
constexpr std::size_t kExactResyncMax = 64;
}  // namespace

void LyapunovObserver::sample(const Configuration& cfg, double, std::vector<double>& out) {
  if (cfg.size() <= kExactResyncMax) W_ = W_value(cfg, spec_);
  out.push_back(W_);
}

void LyapunovObserver::finish(const Configuration& cfg, double, EventLog& log) {
  log.scalars["W0"] = W0_;
  if (!tracker_) return;
  if (cfg.size() <= kExactResyncMax) W_ = W_value(cfg, spec_);
  tracker_->finish(W_);
  log.scalars["tau_K"] = tracker_->sample().tau;
  log.scalars["tau_censored"] = tracker_->sample().censored ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------

SupermartingaleObserver::SupermartingaleObserver(std::function<double(double)> f, std::function<double(double)> cg,
                                                 const Window& w, Point center)
    : f_(std::move(f)), cg_(std::move(cg)), window_(w), center_(center) {}

void SupermartingaleObserver::start(const Configuration& cfg) {
  F_ = C_ = integral_ = t_ = 0.0;
  for (const Point& x : cfg.points()) {
    F_ += f_(radius(x));
    C_ += cg_(radius(x));
  }
}

void SupermartingaleObserver::advance(const Configuration&, double t) {
  integral_ += C_ * (t - t_);
  t_ = t;
}

void SupermartingaleObserver::on_birth(const Configuration&, ParticleId, const Point& x, double t) {
  if (t == 0.0) return;
  F_ += f_(radius(x));
  C_ += cg_(radius(x));
}

void SupermartingaleObserver::on_death(const Configuration&, ParticleId, const Point& x, double) {
  F_ -= f_(radius(x));
  C_ -= cg_(radius(x));
}

void SupermartingaleObserver::sample(const Configuration& cfg, double, std::vector<double>& out) {
  // exact sums at sample times; the running ones only drive the integral
  double F = 0.0, C = 0.0;
  for (const Point& x : cfg.points()) {
    F += f_(radius(x));
    C += cg_(radius(x));
  }
  F_ = F;
  C_ = C;
  out.push_back(F);
  out.push_back(integral_);
}

// ---------------------------------------------------------------------------

void LifetimeObserver::on_birth(const Configuration&, ParticleId id, const Point&, double t) {
  if (t > 0.0 && t <= born_before_) born_[id] = t;
}

void LifetimeObserver::on_death(const Configuration&, ParticleId id, const Point&, double t) {
  auto it = born_.find(id);
  if (it == born_.end()) return;
  ages_.push_back(t - it->second);
  born_.erase(it);
}

void LifetimeObserver::finish(const Configuration&, double, EventLog& log) {
  log.records["lifetimes"] = ages_;
  log.scalars["lifetimes_censored"] = static_cast<double>(born_.size());
}

}  // namespace bdproc
