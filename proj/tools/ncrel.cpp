// ncrel: command-line driver for the noun-compound relation pipeline.
//
//   ncrel <command> --config FILE [--set key=value]... [--threads N]

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncrel/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Noun-compound relation classification pipeline"};
  app.require_subcommand(1, 1);

  std::string config_file;
  std::vector<std::string> overrides;
  int threads = 0;

  for (const auto& name : ncrel::pipeline_commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_file, "key=value configuration file");
    sub->add_option("--set", overrides, "override one config key (key=value)")->allow_extra_args(false);
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ncrel::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  ncrel::RunConfig cfg;
  try {
    if (!config_file.empty()) cfg = ncrel::RunConfig::load(config_file);
    for (const auto& kv : overrides) cfg.set_assignment(kv);
    if (threads > 0) cfg.set("threads", std::to_string(threads));
  } catch (const ncrel::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ncrel::kExitUsage;
  }
  return ncrel::run_guarded(command, cfg, std::cerr);
}
