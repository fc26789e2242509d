#include "bdproc/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>

#include "bdproc/config.hpp"
#include "bdproc/io.hpp"
#include "bdproc/stats.hpp"

#ifndef BDPROC_VERSION
#define BDPROC_VERSION "0.0.0"
#endif

namespace bdproc {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

ExperimentConfig load_any(const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    json j;
    try {
      j = read_json(path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    if (!j.contains("config")) throw ConfigError("'" + path + "' is not a run manifest (no \"config\")");
    return config_from_json(j.at("config"));
  }
  return load_config(path);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string resolve_out(const ExperimentConfig& c, const std::optional<std::string>& override_dir) {
  return override_dir ? *override_dir : c.output_dir;
}

void make_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create directory '" + d + "': " + ec.message());
}

// Runs `body`, mapping exception classes onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const KernelError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CertificationError& e) {
    err << "certification failed: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int cmd_certify(const CertifyCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_any(c.config);
    const std::string dir = resolve_out(cfg, c.out_dir);
    json doc{{"ok", false}, {"config", config_to_json(cfg)}};
    int code = kExitOk;
    std::string text;
    try {
      const Experiment e = prepare(cfg);
      doc["ok"] = true;
      doc["certificates"] = e.certificates;
      text = e.certificate_text;
      if (e.subcritical && cfg.type == "contact" && cfg.supermartingale && !e.subcritical->verdict &&
          cfg.supermartingale_g.empty()) {
        code = kExitFailure;
      }
    } catch (const CertificationError& ex) {
      doc["error"] = ex.what();
      text = std::string("certification failed: ") + ex.what() + "\n";
      code = kExitFailure;
    }
    make_dir(dir);
    write_json(dir + "/certificates.json", doc);
    write_text(dir + "/certificate.txt", text);
    (code == kExitOk ? out : err) << text;
    return code;
  });
}

int cmd_simulate(const SimulateCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_any(c.config);
    if (c.replicates) {
      if (*c.replicates < 1) throw ConfigError("--replicates must be >= 1");
      cfg.replicates = *c.replicates;
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.algorithm) cfg.algorithm = *c.algorithm;
    if (c.emit_events) cfg.record_events = true;
    if (c.threads) cfg.threads = *c.threads;
    const std::string dir = resolve_out(cfg, c.out_dir);
    cfg.output_dir = dir;

    // certification always precedes simulation
    const Experiment e = prepare(cfg);
    const SimParams p = sim_params(e);
    make_dir(dir);
    json manifest{{"software", {{"name", "bdproc"}, {"version", BDPROC_VERSION}}},
                  {"created", utc_now()},
                  {"config", config_to_json(cfg)},
                  {"certificates", e.certificates},
                  {"status", "running"}};
    json seeds = json::array();
    for (std::size_t i = 0; i < cfg.replicates; ++i) seeds.push_back(replicate_seed(cfg.seed, i));
    manifest["replicate_seeds"] = seeds;
    write_json(dir + "/certificates.json", json{{"ok", true}, {"certificates", e.certificates}});
    write_text(dir + "/certificate.txt", e.certificate_text);

    Ensemble ens;
    try {
      ens = run_replicates(p, cfg.replicates, cfg.seed, observer_factory(e), cfg.threads);
    } catch (const std::exception& ex) {
      manifest["status"] = std::string("failed: ") + ex.what();
      write_json(dir + "/manifest.json", manifest);
      err << "simulation failed: " << ex.what() << "\n";
      return kExitFailure;
    }
    std::vector<std::string> outputs = {"observables.csv", "summary.csv", "certificates.json", "certificate.txt"};
    write_observables(dir + "/observables.csv", ens);
    write_summary(dir + "/summary.csv", ens);
    if (write_scalars(dir + "/scalars.csv", ens)) outputs.push_back("scalars.csv");
    if (write_records(dir + "/records.csv", ens)) outputs.push_back("records.csv");
    if (cfg.record_events) {
      write_events(dir + "/events.jsonl", ens, cfg.dim);
      outputs.push_back("events.jsonl");
    }
    ProposalStats tot;
    for (const auto& r : ens.runs) {
      tot.proposals += r.stats.proposals;
      tot.accepted += r.stats.accepted;
      tot.rejected += r.stats.rejected;
      tot.deaths += r.stats.deaths;
    }
    manifest["proposal_stats"] = {
        {"proposals", tot.proposals}, {"accepted", tot.accepted}, {"rejected", tot.rejected}, {"deaths", tot.deaths}};
    manifest["outputs"] = outputs;
    manifest["status"] = "ok";
    write_json(dir + "/manifest.json", manifest);
    out << "simulated " << cfg.replicates << " replicate(s) of " << e.model.name() << " to t=" << cfg.t_max
        << " (" << to_string(cfg.algorithm) << "); outputs in " << dir << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

namespace {

struct AuditContext {
  std::string dir;
  ExperimentConfig cfg;
  Experiment exp;
  ObservableTable obs;
};

const std::vector<std::vector<double>>& need_column(const AuditContext& a, const std::string& name,
                                                    const std::string& hint) {
  if (!a.obs.has(name)) {
    throw ConfigError("observable '" + name + "' is missing from " + a.dir + "/observables.csv; " + hint);
  }
  return a.obs.values.at(name);
}

std::map<std::string, std::vector<double>> need_scalars(const AuditContext& a, const std::string& hint) {
  const std::string path = a.dir + "/scalars.csv";
  if (!fs::exists(path)) throw ConfigError(path + " is missing; " + hint);
  return read_scalars(path);
}

json audit_drift(const AuditContext& a, const AuditCommand& c, bool& pass) {
  const auto& W = need_column(a, "W", "rerun simulate with [lyapunov] enabled = true");
  const LyapunovSpec& s = *a.exp.lyapunov;
  const double h = c.h_mass ? *c.h_mass : s.h_mass;
  const DriftReport rep = drift_audit(a.obs.times, W, s.bconst, h, c.sigmas);
  pass = rep.pass;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"t", r.t}, {"mean", r.mean}, {"se", r.se}, {"bound", r.bound}, {"pass", r.pass}});
  return {{"kind", "drift"},
          {"pass", pass},
          {"b", s.bconst},
          {"h_mass", h},
          {"h_mass_injected", c.h_mass.has_value()},
          {"limsup_estimate", rep.limsup_estimate},
          {"limsup_bound", rep.limsup_bound},
          {"rows", rows}};
}

json audit_density(const AuditContext& a, const AuditCommand& c, bool& pass) {
  const auto& B = need_column(a, "box_count", "the box_count observer is always recorded; the table is damaged");
  if (!a.exp.model.has_global()) throw ConfigError("density audit needs a global birth-rate bound");
  const double b = a.exp.model.global_bound();
  const double volB = std::pow(std::min(a.cfg.box_side, a.cfg.side), a.cfg.dim);
  const bool surgailis = a.cfg.type == "surgailis";
  std::vector<double> col(B.size());
  for (std::size_t i = 0; i < B.size(); ++i) col[i] = B[i][0];
  const Summary s0 = summarize(col);
  pass = true;
  json rows = json::array();
  for (std::size_t k = 0; k < a.obs.times.size(); ++k) {
    for (std::size_t i = 0; i < B.size(); ++i) col[i] = B[i][k];
    const Summary s = summarize(col);
    const double t = a.obs.times[k];
    const double bound = std::max(volB * b, s0.mean);
    bool ok = s.mean <= bound + c.sigmas * s.se;
    json row{{"t", t}, {"mean", s.mean}, {"se", s.se}, {"bound", bound}};
    if (surgailis) {
      const double curve = volB * b * (1.0 - std::exp(-t)) + s0.mean * std::exp(-t);
      const double se = std::hypot(s.se, std::exp(-t) * s0.se);
      const bool curve_ok = std::abs(s.mean - curve) <= c.sigmas * se + 1e-12;
      row["curve"] = curve;
      row["curve_pass"] = curve_ok;
      ok = ok && curve_ok;
    }
    row["pass"] = ok;
    pass = pass && ok;
    rows.push_back(row);
  }
  return {{"kind", "density"}, {"pass", pass}, {"b", b}, {"box_volume", volB}, {"rows", rows}};
}

json audit_supermartingale(const AuditContext& a, const AuditCommand& c, bool& pass) {
  const std::string hint = "rerun simulate with [run] supermartingale = true";
  const auto& F = need_column(a, "F", hint);
  const auto& I = need_column(a, "cg_integral", hint);
  const auto& P = need_column(a, "population", hint);
  SupermartingaleInput in;
  in.times = a.obs.times;
  in.F = F;
  in.integral = I;
  for (const auto& p : P) in.extinct.push_back(p.back() == 0.0);
  const SupermartingaleReport rep = supermartingale_audit(in, c.sigmas);
  pass = rep.pass;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"t", r.t}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"margin", r.margin}, {"pass", r.pass}});
  return {{"kind", "supermartingale"},
          {"pass", pass},
          {"replicates", rep.replicates},
          {"extinction_fraction", rep.extinction_fraction},
          {"wilson_low", rep.wilson_low},
          {"wilson_high", rep.wilson_high},
          {"rows", rows}};
}

json audit_return_times(const AuditContext& a, const AuditCommand& c, bool& pass) {
  const std::string hint = "rerun simulate with [lyapunov] enabled = true and return_level or return_factor set";
  const auto sc = need_scalars(a, hint);
  if (!sc.count("tau_K") || !sc.count("W0") || !a.exp.return_level) throw ConfigError("return times missing; " + hint);
  const auto& tau = sc.at("tau_K");
  const auto& cens = sc.at("tau_censored");
  std::vector<ReturnTimeSample> samples;
  for (std::size_t i = 0; i < tau.size(); ++i)
    samples.push_back(ReturnTimeSample{*a.exp.return_level, a.cfg.delta, tau[i], cens[i] != 0.0});
  const LyapunovSpec& s = *a.exp.lyapunov;
  const double h = c.h_mass ? *c.h_mass : s.h_mass;
  const ReturnTimeReport rep = return_time_audit(samples, sc.at("W0"), s.bconst, h, a.cfg.theta, c.sigmas);
  const bool censor_ok = rep.censored_fraction < 0.01;
  pass = rep.mean_pass && censor_ok && (!rep.exp_applicable || rep.exp_pass);
  return {{"kind", "return-times"},
          {"pass", pass},
          {"K", *a.exp.return_level},
          {"b_h_mass", s.bconst * h},
          {"replicates", rep.replicates},
          {"censored_fraction", rep.censored_fraction},
          {"mean_W0", rep.mean_W0},
          {"mean_tau", rep.mean_tau},
          {"se_tau", rep.se_tau},
          {"mean_bound", rep.mean_bound},
          {"mean_pass", rep.mean_pass},
          {"theta", rep.theta},
          {"mean_exp", rep.mean_exp},
          {"se_exp", rep.se_exp},
          {"exp_bound", rep.exp_bound},
          {"exp_applicable", rep.exp_applicable},
          {"exp_pass", rep.exp_pass}};
}

json audit_domination(const AuditContext& a, const AuditCommand&, bool& pass) {
  const std::string path = a.dir + "/events.jsonl";
  const std::string hint = "rerun simulate with --algorithm coupled --emit-events";
  if (!fs::exists(path)) throw ConfigError(path + " is missing; " + hint);
  if (a.cfg.algorithm != Algorithm::Coupled) throw ConfigError("the run was not coupled; " + hint);
  const auto rows = read_events(path);
  std::uint64_t checks = 0, violations = 0;
  std::string first;
  std::size_t i = 0;
  while (i < rows.size()) {
    const std::size_t rep = rows[i].replicate;
    std::map<ParticleId, Point> eta, xi;
    std::size_t j = i;
    while (j < rows.size() && rows[j].replicate == rep) {
      // apply every event at this time, then check the atoms it touched
      const double t = rows[j].event.t;
      std::set<ParticleId> touched;
      while (j < rows.size() && rows[j].replicate == rep && rows[j].event.t == t) {
        const Event& e = rows[j].event;
        auto& target = e.proc == 0 ? eta : xi;
        if (e.kind == EventKind::Birth) {
          target[e.id] = e.x;
        } else {
          target.erase(e.id);
        }
        touched.insert(e.id);
        ++j;
      }
      for (ParticleId id : touched) {
        ++checks;
        auto it = eta.find(id);
        if (it == eta.end()) continue;
        auto jt = xi.find(id);
        if (jt == xi.end() || jt->second != it->second) {
          if (violations++ == 0) {
            first = "replicate " + std::to_string(rep) + ", t=" + format_double(t) + ", atom " + std::to_string(id);
          }
        }
      }
    }
    i = j;
  }
  pass = violations == 0;
  json j{{"kind", "domination"}, {"pass", pass}, {"checks", checks}, {"violations", violations}};
  if (!first.empty()) j["first_violation"] = first;
  return j;
}

}  // namespace

int cmd_audit(const AuditCommand& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    static const std::set<std::string> kinds = {"drift", "domination", "return-times", "supermartingale", "density"};
    if (!kinds.count(c.kind)) {
      throw ConfigError("unknown audit kind '" + c.kind + "' (drift, domination, return-times, supermartingale, density)");
    }
    AuditContext a;
    a.dir = c.dir;
    const std::string mpath = c.dir + "/manifest.json";
    if (!fs::exists(mpath)) throw ConfigError(mpath + " is missing; run simulate first");
    const json manifest = read_json(mpath);
    if (manifest.value("status", "") != "ok") throw ConfigError("the run in " + c.dir + " did not complete");
    a.cfg = config_from_json(manifest.at("config"));
    a.exp = prepare(a.cfg);
    if ((c.kind == "drift" || c.kind == "return-times") && !a.exp.lyapunov) {
      throw ConfigError(c.kind + " audit needs [lyapunov] enabled = true");
    }
    a.obs = read_observables(c.dir + "/observables.csv");
    bool pass = false;
    json rep;
    if (c.kind == "drift") rep = audit_drift(a, c, pass);
    if (c.kind == "density") rep = audit_density(a, c, pass);
    if (c.kind == "supermartingale") rep = audit_supermartingale(a, c, pass);
    if (c.kind == "return-times") rep = audit_return_times(a, c, pass);
    if (c.kind == "domination") rep = audit_domination(a, c, pass);
    write_json(c.dir + "/audit_" + c.kind + ".json", rep);
    out << c.kind << " audit: " << (pass ? "PASS" : "FAIL") << " (report in " << c.dir << "/audit_" << c.kind
        << ".json)\n";
    return pass ? kExitOk : kExitFailure;
  });
}

}  // namespace bdproc
