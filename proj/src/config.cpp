#include "bdproc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "bdproc/observers.hpp"

namespace bdproc {

namespace {

namespace pt = boost::property_tree;
using json = nlohmann::json;

const std::map<std::string, std::set<std::string>> kSchema = {
    {"window", {"dim", "side", "boundary"}},
    {"model",
     {"type", "a", "phi", "c", "g", "z", "rate", "eps", "phi_floor_alpha", "phi_floor_rho", "condition_spacing"}},
    {"lyapunov",
     {"enabled", "beta0", "beta1", "return_level", "return_factor", "delta", "theta", "radial_nodes",
      "angular_nodes"}},
    {"run",
     {"t_max", "replicates", "seed", "algorithm", "samples", "initial", "initial_lambda", "initial_count",
      "initial_points", "box_side", "record_events", "full_containment_check", "supermartingale",
      "supermartingale_g", "lifetimes_born_before", "threads"}},
    {"output", {"dir"}},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(out)) {
    throw ConfigError("'" + key + "' must be a finite number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "' must be a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("'" + key + "' must be true or false, got '" + v + "'");
}

std::vector<Point> parse_points(const std::string& key, const std::string& v, int dim) {
  std::vector<Point> out;
  std::stringstream all(v);
  std::string item;
  while (std::getline(all, item, ';')) {
    if (trim(item).empty()) continue;
    for (char& ch : item)
      if (ch == ',') ch = ' ';
    std::istringstream ss(item);
    Point p{0.0, 0.0, 0.0};
    std::string tok;
    int k = 0;
    while (ss >> tok) {
      if (k >= dim) throw ConfigError("'" + key + "': point '" + trim(item) + "' has more than d coordinates");
      p[k++] = to_double(key, tok);
    }
    if (k != dim) throw ConfigError("'" + key + "': point '" + trim(item) + "' needs " + std::to_string(dim) + " coordinates");
    out.push_back(p);
  }
  return out;
}

std::string initial_kind_name(InitialState::Kind k) {
  switch (k) {
    case InitialState::Kind::Empty: return "empty";
    case InitialState::Kind::Poisson: return "poisson";
    case InitialState::Kind::Explicit: return "explicit";
    case InitialState::Kind::Uniform: return "uniform";
  }
  return "?";
}

InitialState::Kind initial_kind(const std::string& s) {
  if (s == "empty") return InitialState::Kind::Empty;
  if (s == "poisson") return InitialState::Kind::Poisson;
  if (s == "explicit") return InitialState::Kind::Explicit;
  if (s == "uniform") return InitialState::Kind::Uniform;
  throw ConfigError("run.initial must be empty, poisson, uniform or explicit; got '" + s + "'");
}

RadialKernel kernel_or_zero(const std::string& spec, int dim, const std::string& base) {
  return parse_kernel(spec.empty() ? "zero" : spec, dim, base);
}

void validate(const ExperimentConfig& c) {
  if (c.dim < 1 || c.dim > 3) throw ConfigError("window.dim must be 1, 2 or 3");
  if (!(c.side > 0.0)) throw ConfigError("window.side must be positive");
  static const std::set<std::string> types = {"fecundity", "establishment", "glauber", "surgailis", "contact"};
  if (!types.count(c.type)) throw ConfigError("model.type '" + c.type + "' is not one of fecundity, establishment, glauber, surgailis, contact");
  auto need = [&](const std::string& v, const char* key) {
    if (v.empty()) throw ConfigError("model.type = " + c.type + " needs model." + key);
  };
  auto forbid = [&](const std::string& v, const char* key) {
    if (!v.empty()) throw ConfigError("model." + std::string(key) + " is not used by model.type = " + c.type);
  };
  if (c.type == "fecundity" || c.type == "establishment") {
    need(c.a, "a");
    need(c.phi, "phi");
    forbid(c.g, "g");
  } else if (c.type == "glauber") {
    need(c.phi, "phi");
    forbid(c.a, "a");
    forbid(c.c, "c");
    forbid(c.g, "g");
  } else if (c.type == "surgailis") {
    forbid(c.a, "a");
    forbid(c.phi, "phi");
    forbid(c.c, "c");
    forbid(c.g, "g");
  } else {
    need(c.g, "g");
    forbid(c.a, "a");
    forbid(c.phi, "phi");
    forbid(c.c, "c");
  }
  if (!(c.eps > 0.0)) throw ConfigError("model.eps must be positive");
  if (!(c.z >= 0.0)) throw ConfigError("model.z must be >= 0");
  if (!(c.rate >= 0.0)) throw ConfigError("model.rate must be >= 0");
  if (c.floor_alpha.has_value() != c.floor_rho.has_value()) {
    throw ConfigError("model.phi_floor_alpha and model.phi_floor_rho must be given together");
  }
  if (!(c.condition_spacing > 0.0)) throw ConfigError("model.condition_spacing must be positive");
  if (c.return_level && c.return_factor) throw ConfigError("give lyapunov.return_level or lyapunov.return_factor, not both");
  if (!(c.delta > 0.0)) throw ConfigError("lyapunov.delta must be positive");
  if (!(c.theta > 0.0 && c.theta < 0.5)) throw ConfigError("lyapunov.theta must lie in (0, 1/2)");
  if (c.radial_nodes < 8 || c.angular_nodes < 4) throw ConfigError("lyapunov quadrature needs radial_nodes >= 8 and angular_nodes >= 4");
  if (!(c.t_max >= 0.0)) throw ConfigError("run.t_max must be >= 0");
  if (c.replicates < 1) throw ConfigError("run.replicates must be >= 1");
  if (c.samples < 1) throw ConfigError("run.samples must be >= 1");
  if (!(c.box_side > 0.0)) throw ConfigError("run.box_side must be positive");
  if (c.initial.kind == InitialState::Kind::Poisson && !(c.initial.lambda >= 0.0)) {
    throw ConfigError("run.initial_lambda must be >= 0");
  }
  if (c.output_dir.empty()) throw ConfigError("output.dir must not be empty");
  // kernel specifications parse now so that errors surface before any output
  try {
    for (const std::string* s : {&c.a, &c.phi, &c.c, &c.g, &c.supermartingale_g}) {
      if (!s->empty()) parse_kernel(*s, c.dim, c.base_dir);
    }
  } catch (const KernelError& e) {
    throw ConfigError(std::string("kernel: ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    auto it = kSchema.find(section);
    if (it == kSchema.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside of any section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, v] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
  }
  auto get = [&](const char* section, const char* key) -> std::optional<std::string> {
    auto s = tree.get_child_optional(section);
    if (!s) return std::nullopt;
    auto v = s->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  };
  auto name = [](const char* s, const char* k) { return std::string(s) + "." + k; };

  ExperimentConfig c;
  c.base_dir = base_dir;
  if (auto v = get("window", "dim")) c.dim = static_cast<int>(to_uint(name("window", "dim"), *v));
  if (auto v = get("window", "side")) c.side = to_double(name("window", "side"), *v);
  if (auto v = get("window", "boundary")) {
    try {
      c.boundary = boundary_from_string(*v);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("window.boundary: ") + e.what());
    }
  }

  if (auto v = get("model", "type")) c.type = *v;
  if (auto v = get("model", "a")) c.a = *v;
  if (auto v = get("model", "phi")) c.phi = *v;
  if (auto v = get("model", "c")) c.c = *v;
  if (auto v = get("model", "g")) c.g = *v;
  if (auto v = get("model", "z")) c.z = to_double("model.z", *v);
  if (auto v = get("model", "rate")) c.rate = to_double("model.rate", *v);
  if (auto v = get("model", "eps")) c.eps = to_double("model.eps", *v);
  if (auto v = get("model", "phi_floor_alpha")) c.floor_alpha = to_double("model.phi_floor_alpha", *v);
  if (auto v = get("model", "phi_floor_rho")) c.floor_rho = to_double("model.phi_floor_rho", *v);
  if (auto v = get("model", "condition_spacing")) c.condition_spacing = to_double("model.condition_spacing", *v);

  if (auto v = get("lyapunov", "enabled")) c.lyapunov = to_bool("lyapunov.enabled", *v);
  if (auto v = get("lyapunov", "beta0")) c.beta0 = to_double("lyapunov.beta0", *v);
  if (auto v = get("lyapunov", "beta1")) c.beta1 = to_double("lyapunov.beta1", *v);
  if (auto v = get("lyapunov", "return_level")) c.return_level = to_double("lyapunov.return_level", *v);
  if (auto v = get("lyapunov", "return_factor")) c.return_factor = to_double("lyapunov.return_factor", *v);
  if (auto v = get("lyapunov", "delta")) c.delta = to_double("lyapunov.delta", *v);
  if (auto v = get("lyapunov", "theta")) c.theta = to_double("lyapunov.theta", *v);
  if (auto v = get("lyapunov", "radial_nodes")) c.radial_nodes = static_cast<int>(to_uint("lyapunov.radial_nodes", *v));
  if (auto v = get("lyapunov", "angular_nodes")) c.angular_nodes = static_cast<int>(to_uint("lyapunov.angular_nodes", *v));

  if (auto v = get("run", "t_max")) c.t_max = to_double("run.t_max", *v);
  if (auto v = get("run", "replicates")) c.replicates = to_uint("run.replicates", *v);
  if (auto v = get("run", "seed")) c.seed = to_uint("run.seed", *v);
  if (auto v = get("run", "algorithm")) {
    try {
      c.algorithm = algorithm_from_string(*v);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("run.algorithm: ") + e.what());
    }
  }
  if (auto v = get("run", "samples")) c.samples = static_cast<int>(to_uint("run.samples", *v));
  if (auto v = get("run", "initial")) c.initial.kind = initial_kind(*v);
  if (auto v = get("run", "initial_lambda")) c.initial.lambda = to_double("run.initial_lambda", *v);
  if (auto v = get("run", "initial_count")) c.initial.count = to_uint("run.initial_count", *v);
  if (auto v = get("run", "initial_points")) c.initial.points = parse_points("run.initial_points", *v, c.dim);
  if (auto v = get("run", "box_side")) c.box_side = to_double("run.box_side", *v);
  if (auto v = get("run", "record_events")) c.record_events = to_bool("run.record_events", *v);
  if (auto v = get("run", "full_containment_check")) c.full_containment_check = to_bool("run.full_containment_check", *v);
  if (auto v = get("run", "supermartingale")) c.supermartingale = to_bool("run.supermartingale", *v);
  if (auto v = get("run", "supermartingale_g")) c.supermartingale_g = *v;
  if (auto v = get("run", "lifetimes_born_before")) c.lifetimes_born_before = to_double("run.lifetimes_born_before", *v);
  if (auto v = get("run", "threads")) c.threads = static_cast<unsigned>(to_uint("run.threads", *v));

  if (auto v = get("output", "dir")) c.output_dir = *v;

  auto set_for = [&](const char* key, bool ok, const char* kind) {
    if (get("run", key) && !ok) throw ConfigError(std::string("run.") + key + " is only used with run.initial = " + kind);
  };
  set_for("initial_lambda", c.initial.kind == InitialState::Kind::Poisson, "poisson");
  set_for("initial_count", c.initial.kind == InitialState::Kind::Uniform, "uniform");
  set_for("initial_points", c.initial.kind == InitialState::Kind::Explicit, "explicit");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  return parse_config(ss.str(), dir.string());
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json pts = json::array();
  for (const Point& p : c.initial.points) pts.push_back(std::vector<double>(p.begin(), p.begin() + c.dim));
  return json{
      {"base_dir", c.base_dir},
      {"window", {{"dim", c.dim}, {"side", c.side}, {"boundary", to_string(c.boundary)}}},
      {"model",
       {{"type", c.type},
        {"a", c.a},
        {"phi", c.phi},
        {"c", c.c},
        {"g", c.g},
        {"z", c.z},
        {"rate", c.rate},
        {"eps", c.eps},
        {"phi_floor_alpha", opt_json(c.floor_alpha)},
        {"phi_floor_rho", opt_json(c.floor_rho)},
        {"condition_spacing", c.condition_spacing}}},
      {"lyapunov",
       {{"enabled", c.lyapunov},
        {"beta0", opt_json(c.beta0)},
        {"beta1", opt_json(c.beta1)},
        {"return_level", opt_json(c.return_level)},
        {"return_factor", opt_json(c.return_factor)},
        {"delta", c.delta},
        {"theta", c.theta},
        {"radial_nodes", c.radial_nodes},
        {"angular_nodes", c.angular_nodes}}},
      {"run",
       {{"t_max", c.t_max},
        {"replicates", c.replicates},
        {"seed", c.seed},
        {"algorithm", to_string(c.algorithm)},
        {"samples", c.samples},
        {"initial", initial_kind_name(c.initial.kind)},
        {"initial_lambda", c.initial.lambda},
        {"initial_count", c.initial.count},
        {"initial_points", pts},
        {"box_side", c.box_side},
        {"record_events", c.record_events},
        {"full_containment_check", c.full_containment_check},
        {"supermartingale", c.supermartingale},
        {"supermartingale_g", c.supermartingale_g},
        {"lifetimes_born_before", opt_json(c.lifetimes_born_before)},
        {"threads", c.threads}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.base_dir = j.at("base_dir").get<std::string>();
    const json& w = j.at("window");
    c.dim = w.at("dim").get<int>();
    c.side = w.at("side").get<double>();
    c.boundary = boundary_from_string(w.at("boundary").get<std::string>());
    const json& m = j.at("model");
    c.type = m.at("type").get<std::string>();
    c.a = m.at("a").get<std::string>();
    c.phi = m.at("phi").get<std::string>();
    c.c = m.at("c").get<std::string>();
    c.g = m.at("g").get<std::string>();
    c.z = m.at("z").get<double>();
    c.rate = m.at("rate").get<double>();
    c.eps = m.at("eps").get<double>();
    c.floor_alpha = opt_from<double>(m, "phi_floor_alpha");
    c.floor_rho = opt_from<double>(m, "phi_floor_rho");
    c.condition_spacing = m.at("condition_spacing").get<double>();
    const json& l = j.at("lyapunov");
    c.lyapunov = l.at("enabled").get<bool>();
    c.beta0 = opt_from<double>(l, "beta0");
    c.beta1 = opt_from<double>(l, "beta1");
    c.return_level = opt_from<double>(l, "return_level");
    c.return_factor = opt_from<double>(l, "return_factor");
    c.delta = l.at("delta").get<double>();
    c.theta = l.at("theta").get<double>();
    c.radial_nodes = l.at("radial_nodes").get<int>();
    c.angular_nodes = l.at("angular_nodes").get<int>();
    const json& r = j.at("run");
    c.t_max = r.at("t_max").get<double>();
    c.replicates = r.at("replicates").get<std::size_t>();
    c.seed = r.at("seed").get<std::uint64_t>();
    c.algorithm = algorithm_from_string(r.at("algorithm").get<std::string>());
    c.samples = r.at("samples").get<int>();
    c.initial.kind = initial_kind(r.at("initial").get<std::string>());
    c.initial.lambda = r.at("initial_lambda").get<double>();
    c.initial.count = r.at("initial_count").get<std::size_t>();
    for (const auto& p : r.at("initial_points")) {
      Point q{0.0, 0.0, 0.0};
      for (std::size_t k = 0; k < p.size() && k < 3; ++k) q[k] = p[k].get<double>();
      c.initial.points.push_back(q);
    }
    c.box_side = r.at("box_side").get<double>();
    c.record_events = r.at("record_events").get<bool>();
    c.full_containment_check = r.at("full_containment_check").get<bool>();
    c.supermartingale = r.at("supermartingale").get<bool>();
    c.supermartingale_g = r.at("supermartingale_g").get<std::string>();
    c.lifetimes_born_before = opt_from<double>(r, "lifetimes_born_before");
    c.threads = r.at("threads").get<unsigned>();
    c.output_dir = j.at("output").at("dir").get<std::string>();
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("manifest config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

json report_json(const KernelConditionReport& r) {
  return json{{"B", r.B_found},        {"B_linear", r.B_linear},     {"alpha", r.alpha},
              {"rho", r.rho},          {"p", r.p_found},             {"bounded_by_G", r.bounded_by_G},
              {"phi_floor", r.phi_floor}, {"c_dominated", r.c_dominated}, {"samples", r.samples},
              {"note", r.note},        {"failures", r.failures}};
}

json subcritical_json(const SubcriticalReport& s) {
  json j{{"r_p", s.r_p}, {"g_mass", s.g_mass}, {"subcritical", s.verdict}, {"notes", s.notes}};
  if (s.cg) {
    j["c_g"] = {{"C", s.cg->C},
                {"R", s.cg->R},
                {"R1", std::isfinite(s.cg->R1) ? json(s.cg->R1) : json("inf")},
                {"plateau", s.cg->plateau},
                {"cg_mass", s.cg->cg_mass},
                {"tail_bound", s.cg->tail_bound}};
  }
  if (s.fixpoint) {
    const FixpointResult& f = *s.fixpoint;
    j["fixpoint"] = {{"spacing", f.spacing},
                     {"domain", f.domain},
                     {"iterations", f.iterations},
                     {"residual", f.residual},
                     {"f_mass", f.f_mass},
                     {"cg_mass_grid", f.cg_mass_grid},
                     {"mass_balance_error", f.mass_balance_error()}};
  }
  return j;
}

void text_line(std::ostringstream& out, const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  out << key << " = " << buf << "\n";
}

}  // namespace

Experiment prepare(const ExperimentConfig& c) {
  validate(c);
  Experiment e;
  e.config = c;
  e.window = Window(c.dim, c.side, c.boundary);
  const std::string& base = c.base_dir;

  ModelVariant v;
  if (c.type == "fecundity") {
    v = model::Fecundity{parse_kernel(c.a, c.dim, base), parse_kernel(c.phi, c.dim, base), kernel_or_zero(c.c, c.dim, base)};
  } else if (c.type == "establishment") {
    v = model::Establishment{parse_kernel(c.a, c.dim, base), parse_kernel(c.phi, c.dim, base),
                             kernel_or_zero(c.c, c.dim, base)};
  } else if (c.type == "glauber") {
    v = model::Glauber{c.z, parse_kernel(c.phi, c.dim, base)};
  } else if (c.type == "surgailis") {
    v = model::Surgailis{c.rate};
  } else {
    v = model::Contact{parse_kernel(c.g, c.dim, base)};
  }
  CertifyOptions opt;
  opt.gw = GWeight{c.eps, c.dim};
  opt.grid.spacing = c.condition_spacing;
  if (c.floor_alpha) opt.phi_floor = std::make_pair(*c.floor_alpha, *c.floor_rho);
  e.model = certify_bounds(v, e.window, opt);

  const CertifiedBounds& b = e.model.bounds();
  json cert{{"model", e.model.name()},
            {"window", {{"dim", c.dim}, {"side", c.side}, {"boundary", to_string(c.boundary)}}},
            {"eps", c.eps},
            {"global_bound", opt_json(b.global)},
            {"per_parent_bound", opt_json(b.per_parent)},
            {"constants", b.constants},
            {"notes", b.notes}};
  if (b.conditions) cert["conditions"] = report_json(*b.conditions);
  std::ostringstream txt;
  txt << "model = " << e.model.name() << "\n";
  if (b.global) text_line(txt, "global_bound", *b.global);
  if (b.per_parent) text_line(txt, "per_parent_bound", *b.per_parent);
  for (const auto& [k, val] : b.constants) text_line(txt, "constant." + k, val);

  if (c.type == "fecundity" || c.type == "establishment" || c.type == "contact") {
    e.subcritical = subcritical_check(e.model, c.eps, c.supermartingale && c.supermartingale_g.empty());
    cert["subcritical"] = subcritical_json(*e.subcritical);
    txt << "subcritical = " << (e.subcritical->verdict ? "true" : "false") << "\n";
    text_line(txt, "subcritical.g_mass", e.subcritical->g_mass);
  }

  if (c.supermartingale) {
    if (!c.supermartingale_g.empty()) {
      const RadialKernel g = parse_kernel(c.supermartingale_g, c.dim, base);
      const BirthModel ref = certify_bounds(model::Contact{g}, e.window, opt);
      e.supermartingale_reference = subcritical_check(ref, c.eps, true);
    } else {
      e.supermartingale_reference = e.subcritical;
    }
    if (!e.supermartingale_reference || !e.supermartingale_reference->fixpoint) {
      throw CertificationError(
          "supermartingale observers need a subcritical envelope with a solved fixpoint f = c_g + c_g * f");
    }
    cert["supermartingale_reference"] = subcritical_json(*e.supermartingale_reference);
  }

  if (c.lyapunov) {
    if (!e.model.has_global()) {
      throw CertificationError("the Lyapunov functional needs a global birth-rate bound; " + e.model.name() + " has none");
    }
    PairKernel K = default_pair_kernel(c.dim);
    if (c.beta0) K.beta0 = *c.beta0;
    if (c.beta1) K.beta1 = *c.beta1;
    C1Options copt;
    copt.radial_nodes = c.radial_nodes;
    copt.angular_nodes = c.angular_nodes;
    e.lyapunov = calibrate_spec(e.model.global_bound(), K, GWeight{c.eps, c.dim}, e.window, copt);
    const LyapunovSpec& s = *e.lyapunov;
    const double bh = s.bconst * s.h_mass;
    if (c.return_level) e.return_level = *c.return_level;
    if (c.return_factor) e.return_level = *c.return_factor * bh;
    cert["lyapunov"] = {{"beta0", K.beta0}, {"beta1", K.beta1}, {"C_G", s.C_G},     {"C_G_error", s.C_G_error},
                        {"c", s.c},         {"C1", s.C1},       {"h_mass", s.h_mass}, {"b_h_mass", bh},
                        {"return_level", opt_json(e.return_level)}, {"delta", c.delta}, {"theta", c.theta}};
    text_line(txt, "lyapunov.C_G", s.C_G);
    text_line(txt, "lyapunov.c", s.c);
    text_line(txt, "lyapunov.C1", s.C1);
    text_line(txt, "lyapunov.h_mass", s.h_mass);
    if (e.return_level) text_line(txt, "lyapunov.return_level", *e.return_level);
  }
  e.certificates = std::move(cert);
  e.certificate_text = txt.str();
  return e;
}

SimParams sim_params(const Experiment& e) {
  const ExperimentConfig& c = e.config;
  SimParams p;
  p.window = e.window;
  p.model = e.model;
  p.t_max = c.t_max;
  p.initial = c.initial;
  p.algorithm = c.algorithm;
  p.sample_times = default_schedule(c.t_max, c.samples);
  p.record_events = c.record_events;
  p.full_containment_check = c.full_containment_check;
  return p;
}

ObserverFactory observer_factory(const Experiment& e) {
  const ExperimentConfig c = e.config;
  const Window w = e.window;
  std::optional<LyapunovSpec> spec = e.lyapunov;
  std::optional<LyapunovObserver::ReturnLevel> level;
  if (e.return_level) level = LyapunovObserver::ReturnLevel{*e.return_level, c.delta};
  std::shared_ptr<const FixpointResult> fix;
  std::optional<RadialKernel> cg;
  if (e.supermartingale_reference) {
    fix = std::make_shared<FixpointResult>(*e.supermartingale_reference->fixpoint);
    cg = e.supermartingale_reference->cg->cg;
  }
  return [=]() {
    ObserverSet obs;
    obs.push_back(std::make_unique<PopulationObserver>());
    obs.push_back(std::make_unique<BoxCountObserver>(c.box_side, w.center()));
    if (spec) obs.push_back(std::make_unique<LyapunovObserver>(*spec, level, c.t_max));
    if (fix) {
      const RadialKernel k = *cg;
      obs.push_back(std::make_unique<SupermartingaleObserver>([fix](double r) { return fix->at(r); },
                                                              [k](double r) { return k(r); }, w, w.center()));
    }
    if (c.lifetimes_born_before) obs.push_back(std::make_unique<LifetimeObserver>(*c.lifetimes_born_before));
    return obs;
  };
}

}  // namespace bdproc
