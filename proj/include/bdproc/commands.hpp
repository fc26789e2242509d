#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "bdproc/engine.hpp"

namespace bdproc {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // failed certificate, audit or runtime assertion
inline constexpr int kExitUsage = 2;    // usage or configuration error; nothing written

struct CertifyCommand {
  std::string config;                    // .ini config or manifest.json
  std::optional<std::string> out_dir;    // defaults to [output] dir
};

struct SimulateCommand {
  std::string config;  // .ini config or manifest.json
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<Algorithm> algorithm;
  bool emit_events = false;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};

struct AuditCommand {
  std::string dir;
  std::string kind;  // drift | domination | return-times | supermartingale | density
  std::optional<double> h_mass;  // replaces the certified <h> (negative controls)
  double sigmas = 3.0;
};

int cmd_certify(const CertifyCommand& c, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateCommand& c, std::ostream& out, std::ostream& err);
int cmd_audit(const AuditCommand& c, std::ostream& out, std::ostream& err);

}  // namespace bdproc
