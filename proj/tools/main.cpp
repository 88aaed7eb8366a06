#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_common(CLI::App* app, pitchfork::cli::CommonOptions& o) {
  app->add_option("--config", o.config_path, "Config file (key = value, [sections])");
  app->add_option("--preset", o.preset, "Preset name under the data directory, or a preset file");
  app->add_option("--seed", o.seed, "First seed (run.seed)");
  app->add_option("--seeds", o.seeds, "Number of consecutive seeds (run.seeds)");
  app->add_option("--out", o.out, "Output directory (run.out)");
  app->add_option("--set", o.overrides, "Override one config key: --set section.key=value");
  app->add_flag("--print-config", o.print_config, "Print the resolved config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Criticality probes, pitchfork normal forms and escape-time analysis"};
  app.set_version_flag("--version", pitchfork::kVersion);
  app.require_subcommand(1);

  pitchfork::cli::CommonOptions opts;
  std::string command;

  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, const std::string& full) {
    CLI::App* sub = parent->add_subcommand(name, help);
    add_common(sub, opts);
    sub->callback([&command, full] { command = full; });
    return sub;
  };

  leaf(&app, "calibrate-hessian", "Locate the Hessian zero crossing and compare finite differences", "calibrate-hessian");

  CLI::App* toy = app.add_subcommand("toy", "Toy probe experiments on synthetic data");
  toy->require_subcommand(1);
  leaf(toy, "bimodal", "Forward split with learned precision", "toy bimodal");
  leaf(toy, "unimodal", "Unimodal control against the bimodal split", "toy unimodal");
  leaf(toy, "hierarchy", "Two-level hierarchical splitting", "toy hierarchy");
  leaf(toy, "reverse", "Reverse traversal of the precision ladder", "toy reverse");
  leaf(toy, "endogenous", "Probe on the latents of a training autoencoder", "toy endogenous");

  CLI::App* sde = app.add_subcommand("sde", "Normal-form stochastic simulations");
  sde->require_subcommand(1);
  leaf(sde, "pitchfork", "Scalar pitchfork normal form", "sde pitchfork");
  leaf(sde, "coupled", "Coupled vector modes and direction persistence", "sde coupled");

  CLI::App* escape = app.add_subcommand("escape", "Escape-time sweeps and model fits");
  escape->require_subcommand(1);
  leaf(escape, "sweep", "Tilted-Langevin escape sweep over gamma", "escape sweep");
  leaf(escape, "fit", "Fit power-law and Kramers models to an escape table", "escape fit")
      ->add_option("--input", opts.input, "Escape table CSV (defaults to the bundled table5.csv)");

  leaf(&app, "classify", "Classify a trajectory CSV into an arc shape", "classify")
      ->add_option("--input", opts.input, "Trajectory CSV")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return pitchfork::cli::run(command, opts);
  } catch (const pitchfork::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pitchfork::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
