#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "waveplate/scenario.hpp"

// Exit codes: 0 all asserted properties passed, 1 at least one property
// failed, 2 usage or configuration error.
int main(int argc, char** argv) {
  CLI::App app{"spectral Galerkin simulator for a chamber-wall coupled system"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  int rc = 0;
  auto run = [&](const std::string& scenario_override) {
    try {
      waveplate::ScenarioConfig cfg = waveplate::load_config(config_path);
      if (!scenario_override.empty()) cfg.scenario = scenario_override;
      if (seed) cfg.seed = *seed;
      cfg.validate();
      const waveplate::RunSummary summary =
          waveplate::run_scenario(cfg, out_dir, quiet);
      if (!quiet)
        std::printf("artifacts written to %s\n", out_dir.c_str());
      rc = summary.pass ? 0 : 1;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      rc = 2;
    }
  };

  auto add_subcommand = [&](const std::string& name, const std::string& desc,
                            const std::string& scenario_override) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "flat key=value run description")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out-dir", out_dir, "artifact directory (default: out)");
    sub->add_option("--seed", seed, "override the config's random seed");
    sub->add_flag("--quiet", quiet, "suppress progress output");
    sub->callback([&run, scenario_override]() { run(scenario_override); });
    return sub;
  };

  add_subcommand("simulate", "run the scenario named in the config file", "");
  add_subcommand("identity-check", "energy-identity verification run", "identity-check");
  add_subcommand("converge", "truncation refinement study", "converge");
  add_subcommand("perturb", "initial-data perturbation study", "perturb");
  add_subcommand("blowup", "finite-time blow-up exploration", "blowup-explore");
  add_subcommand("basis", "solve and dump both mode families", "basis");
  add_subcommand("dump-ops", "dump the assembled operator matrices", "dump-ops");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return rc;
}
