#include "bdproc/events.hpp"

#include <stdexcept>

namespace bdproc {

std::size_t EventLog::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw std::out_of_range("no observable named '" + name + "' in the log");
}

Configuration replay(const EventLog& log, const Window& w, double cell_size, double t, int proc) {
  Configuration cfg(w, cell_size);
  for (const Event& e : log.events) {
    if (e.t > t) break;
    if (e.proc != proc) continue;
    if (e.kind == EventKind::Birth) {
      cfg.insert_with_id(e.id, e.x);
    } else {
      cfg.remove(e.id);
    }
  }
  return cfg;
}

}  // namespace bdproc
