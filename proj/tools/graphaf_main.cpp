#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphaf/commands.hpp"
#include "graphaf/error.hpp"

int main(int argc, char** argv) {
  using namespace graphaf;
  CLI::App app{"GraphAF: flow-based autoregressive graph generation"};
  app.set_help_flag("--help", "Print this help message and exit");

  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  CommandOptions options;
  std::vector<std::pair<std::string, std::string>> flags;

  app.add_option("command", command, "gen-data | train | sample | evaluate | finetune | optimize-constrained | selfcheck")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "Config file of 'key = value' lines");
  app.add_option("--set", overrides, "Override any config key (key=value)");
  app.add_flag("--trace", options.trace, "sample: write per-step traces");
  app.add_flag("--csv", options.csv, "evaluate: also write report.csv");

  const std::vector<std::pair<std::string, std::string>> keyed = {
      {"--seed", "seed"},         {"--epochs", "epochs"},     {"--batch", "batch"},
      {"--lr", "lr"},             {"--out", "out"},           {"--threads", "threads"},
      {"--scorer", "scorer"},     {"--checkpoint", "checkpoint"}, {"--count", "samples"},
      {"--iterations", "iterations"}, {"--dataset", "dataset"},
  };
  std::vector<std::string> values(keyed.size());
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    app.add_option(keyed[k].first, values[k], "Sets config key '" + keyed[k].second + "'");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(config_path, cfg);
    for (std::size_t k = 0; k < keyed.size(); ++k) {
      if (app.count(keyed[k].first)) cfg.set(keyed[k].second, values[k]);
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
      cfg.set(o.substr(0, eq), o.substr(eq + 1));
    }
    return run_command(command, cfg, options, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
