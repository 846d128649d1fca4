#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdbp/config.hpp"
#include "crowdbp/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"crowdbp: majority-correlation message passing on bipartite "
               "user/question graphs"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment");
  std::string config_arg;
  std::vector<std::string> overrides;
  std::string out_dir;
  run->add_option("--config", config_arg,
                  "config file path, or the name of a builtin preset")
      ->required();
  run->add_option("--set", overrides, "override a config entry, key=value");
  run->add_option("--out", out_dir, "output directory (overrides output_path)");

  auto* presets = app.add_subcommand("presets", "builtin configurations");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "list builtin presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& p : crowdbp::builtin_presets()) {
        std::cout << p.name << "\n    " << p.description << "\n";
      }
      return 0;
    }
    if (run->parsed()) {
      crowdbp::ConfigMap map;
      if (std::filesystem::exists(config_arg)) {
        map = crowdbp::parse_config_file(config_arg);
      } else if (const crowdbp::Preset* p = crowdbp::find_preset(config_arg)) {
        map = crowdbp::parse_config_text(p->text);
      } else {
        throw crowdbp::ConfigError("no such config file or preset: " + config_arg);
      }
      for (const auto& s : overrides) crowdbp::apply_override(map, s);
      const crowdbp::ExperimentConfig cfg = crowdbp::make_experiment_config(map);
      if (!crowdbp::run_and_write(cfg, out_dir)) {
        std::cerr << "crowdbp: one or more experiment checks failed "
                     "(see summary.txt)\n";
        return 2;
      }
      return 0;
    }
  } catch (const crowdbp::ConfigError& e) {
    std::cerr << "crowdbp: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "crowdbp: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
