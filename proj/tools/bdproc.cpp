#include <CLI11.hpp>
#include <iostream>

#include "bdproc/commands.hpp"

int main(int argc, char** argv) {
  using namespace bdproc;
  CLI::App app{"Spatial birth-death processes: certified bounds, simulation and audits"};
  app.require_subcommand(1);

  CertifyCommand certify;
  auto* cc = app.add_subcommand("certify", "Certify birth-rate bounds and write the certificate");
  cc->add_option("config", certify.config, "config (.ini) or manifest.json")->required();
  cc->add_option("--out", certify.out_dir, "output directory (default: [output] dir)");

  SimulateCommand sim;
  std::string algorithm;
  auto* sc = app.add_subcommand("simulate", "Run a seeded replicate ensemble");
  sc->add_option("config", sim.config, "config (.ini) or manifest.json")->required();
  sc->add_option("--replicates", sim.replicates, "number of replicates");
  sc->add_option("--seed", sim.seed, "base seed");
  sc->add_option("--algorithm", algorithm, "driver | per-parent | coupled")
      ->check(CLI::IsMember({"driver", "per-parent", "coupled"}));
  sc->add_flag("--emit-events", sim.emit_events, "write events.jsonl");
  sc->add_option("--out", sim.out_dir, "output directory (default: [output] dir)");
  sc->add_option("--threads", sim.threads, "worker threads (0: all cores)");

  AuditCommand audit;
  auto* ac = app.add_subcommand("audit", "Audit a finished ensemble against its bounds");
  ac->add_option("dir", audit.dir, "ensemble output directory")->required();
  ac->add_option("--kind", audit.kind, "audit kind")
      ->required()
      ->check(CLI::IsMember({"drift", "domination", "return-times", "supermartingale", "density"}));
  ac->add_option("--h-mass", audit.h_mass, "replace the certified <h> (negative control)");
  ac->add_option("--sigmas", audit.sigmas, "tolerance in standard errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*cc) return cmd_certify(certify, std::cout, std::cerr);
  if (*sc) {
    if (!algorithm.empty()) sim.algorithm = algorithm_from_string(algorithm);
    return cmd_simulate(sim, std::cout, std::cerr);
  }
  return cmd_audit(audit, std::cout, std::cerr);
}
