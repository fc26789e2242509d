#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdproc/engine.hpp"

namespace bdproc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// %.17g, so values round-trip exactly.
std::string format_double(double v);

// replicate,time,name,value; replicate-major, then time, then observable.
void write_observables(const std::string& path, const Ensemble& ens);
// name,time,mean,variance,se
void write_summary(const std::string& path, const Ensemble& ens);
// replicate,name,value for per-run scalars; returns false when there are none.
bool write_scalars(const std::string& path, const Ensemble& ens);
bool write_records(const std::string& path, const Ensemble& ens);
// One JSON object per line: replicate, proc, t, kind, id, x, parent.
void write_events(const std::string& path, const Ensemble& ens, int dim);

struct ObservableTable {
  std::vector<double> times;
  // values[name][replicate][time index]
  std::map<std::string, std::vector<std::vector<double>>> values;
  std::size_t replicates() const { return values.empty() ? 0 : values.begin()->second.size(); }
  bool has(const std::string& name) const { return values.count(name) != 0; }
};

ObservableTable read_observables(const std::string& path);
// scalars[name][replicate]
std::map<std::string, std::vector<double>> read_scalars(const std::string& path);

struct EventRow {
  std::size_t replicate = 0;
  Event event;
};
std::vector<EventRow> read_events(const std::string& path);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace bdproc
