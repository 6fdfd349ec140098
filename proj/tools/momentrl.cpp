// Command-line front end: momentrl run --config <path> [--output-dir <path>]

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "momentrl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Filtrated policy search on moment systems of ensemble control problems"};
  app.set_version_flag("--version", std::string(momentrl::cli::kVersion));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  std::string config;
  std::string output_dir;
  run->add_option("--config", config, "Path to the JSON config")->required();
  run->add_option("--output-dir", output_dir, "Directory for CSV and summary.json (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return momentrl::cli::kConfigError;
  }

  std::optional<std::string> out;
  if (!output_dir.empty()) out = output_dir;
  return momentrl::cli::run_command(config, out);
}
