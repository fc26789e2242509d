#include "bdproc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bdproc {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_num(const std::string& s, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("'" + path + "': bad number '" + s + "'");
  }
}

}  // namespace

void write_observables(const std::string& path, const Ensemble& ens) {
  std::ofstream out = open_out(path);
  out << "replicate,time,name,value\n";
  for (std::size_t i = 0; i < ens.runs.size(); ++i) {
    const EventLog& r = ens.runs[i];
    for (std::size_t k = 0; k < r.sample_times.size(); ++k) {
      const std::string t = format_double(r.sample_times[k]);
      for (std::size_t c = 0; c < r.names.size(); ++c) {
        out << i << ',' << t << ',' << r.names[c] << ',' << format_double(r.samples[c][k]) << '\n';
      }
    }
  }
}

void write_summary(const std::string& path, const Ensemble& ens) {
  std::ofstream out = open_out(path);
  out << "name,time,mean,variance,se\n";
  for (const std::string& n : ens.names) {
    const SeriesSummary& s = ens.summary.at(n);
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
      out << n << ',' << format_double(ens.times[k]) << ',' << format_double(s.mean[k]) << ','
          << format_double(s.variance[k]) << ',' << format_double(s.se[k]) << '\n';
    }
  }
}

bool write_scalars(const std::string& path, const Ensemble& ens) {
  bool any = false;
  for (const auto& r : ens.runs) any = any || !r.scalars.empty();
  if (!any) return false;
  std::ofstream out = open_out(path);
  out << "replicate,name,value\n";
  for (std::size_t i = 0; i < ens.runs.size(); ++i)
    for (const auto& [k, v] : ens.runs[i].scalars) out << i << ',' << k << ',' << format_double(v) << '\n';
  return true;
}

bool write_records(const std::string& path, const Ensemble& ens) {
  bool any = false;
  for (const auto& r : ens.runs) any = any || !r.records.empty();
  if (!any) return false;
  std::ofstream out = open_out(path);
  out << "replicate,name,value\n";
  for (std::size_t i = 0; i < ens.runs.size(); ++i)
    for (const auto& [k, vs] : ens.runs[i].records)
      for (double v : vs) out << i << ',' << k << ',' << format_double(v) << '\n';
  return true;
}

void write_events(const std::string& path, const Ensemble& ens, int dim) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < ens.runs.size(); ++i) {
    for (const Event& e : ens.runs[i].events) {
      json j{{"replicate", i},
             {"proc", e.proc},
             {"t", e.t},
             {"kind", e.kind == EventKind::Birth ? "birth" : "death"},
             {"id", e.id},
             {"x", std::vector<double>(e.x.begin(), e.x.begin() + dim)},
             {"parent", e.parent ? json(*e.parent) : json(nullptr)}};
      out << j.dump() << '\n';
    }
  }
}

ObservableTable read_observables(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "replicate,time,name,value") {
    throw IoError("'" + path + "' is not an observables table");
  }
  ObservableTable t;
  std::map<double, std::size_t> time_index;
  struct Row {
    std::size_t rep;
    double t;
    std::string name;
    double v;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw IoError("'" + path + "': malformed row '" + line + "'");
    rows.push_back(Row{static_cast<std::size_t>(parse_num(cells[0], path)), parse_num(cells[1], path), cells[2],
                       parse_num(cells[3], path)});
    time_index.emplace(rows.back().t, 0);
  }
  std::size_t k = 0;
  for (auto& [tv, idx] : time_index) {
    idx = k++;
    t.times.push_back(tv);
  }
  std::size_t reps = 0;
  for (const Row& r : rows) reps = std::max(reps, r.rep + 1);
  for (const Row& r : rows) {
    auto& v = t.values[r.name];
    if (v.empty()) v.assign(reps, std::vector<double>(t.times.size(), 0.0));
    v[r.rep][time_index.at(r.t)] = r.v;
  }
  return t;
}

std::map<std::string, std::vector<double>> read_scalars(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::vector<double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw IoError("'" + path + "': malformed row '" + line + "'");
    const auto rep = static_cast<std::size_t>(parse_num(cells[0], path));
    auto& v = out[cells[1]];
    if (v.size() <= rep) v.resize(rep + 1, 0.0);
    v[rep] = parse_num(cells[2], path);
  }
  return out;
}

std::vector<EventRow> read_events(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<EventRow> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EventRow r;
      r.replicate = j.at("replicate").get<std::size_t>();
      r.event.proc = j.at("proc").get<int>();
      r.event.t = j.at("t").get<double>();
      r.event.kind = j.at("kind").get<std::string>() == "birth" ? EventKind::Birth : EventKind::Death;
      r.event.id = j.at("id").get<ParticleId>();
      const auto x = j.at("x").get<std::vector<double>>();
      for (std::size_t k = 0; k < x.size() && k < 3; ++k) r.event.x[k] = x[k];
      if (!j.at("parent").is_null()) r.event.parent = j.at("parent").get<ParticleId>();
      out.push_back(r);
    } catch (const json::exception& e) {
      throw IoError("'" + path + "': " + e.what());
    }
  }
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
}

}  // namespace bdproc
