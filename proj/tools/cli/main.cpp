#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pipeline.hpp"

int main(int argc, char** argv) {
  namespace cli = cocycle::cli;
  CLI::App app{"Monte Carlo laboratory for random matrix cocycles"};
  app.set_version_flag("--version", cli::tool_version());
  app.require_subcommand(1);

  std::string config;
  std::string stats;

  auto* certify = app.add_subcommand("certify", "Run the configured certifications");
  certify->add_option("config", config, "Experiment config (JSON)")->required();
  auto* simulate = app.add_subcommand("simulate", "Simulate trajectories and write stats.csv");
  simulate->add_option("config", config, "Experiment config (JSON)")->required();
  auto* analyze = app.add_subcommand("analyze", "Distances, rate fits and tail checks on stored stats");
  analyze->add_option("config", config, "Experiment config (JSON)")->required();
  analyze->add_option("--stats", stats, "stats.csv to analyze (default <output_dir>/stats.csv)");
  auto* all = app.add_subcommand("all", "certify, simulate and analyze");
  all->add_option("config", config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitInputError;
  }

  if (*certify) return cli::cmd_certify(config, std::cerr);
  if (*simulate) return cli::cmd_simulate(config, std::cerr);
  if (*analyze) {
    std::optional<std::filesystem::path> sp;
    if (!stats.empty()) sp = stats;
    return cli::cmd_analyze(config, sp, std::cerr);
  }
  return cli::cmd_all(config, std::cerr);
}
