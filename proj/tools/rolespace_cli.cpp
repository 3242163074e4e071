#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "rolespace/pipeline.hpp"

namespace {

constexpr int kOk = 0, kRuntime = 1, kUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role-space lifecycle modelling of online contributors"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides run.seed)");
  app.add_option("--out", out_dir, "output directory (overrides ROLESPACE_OUT_DIR and paths.out)");

  for (const auto& stage : rolespace::stage_names()) app.add_subcommand(stage, "run the " + stage + " stage");
  app.add_subcommand("all", "run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    auto config = config_path.empty() ? rolespace::default_config() : rolespace::PipelineConfig::load(config_path);
    if (const char* env = std::getenv("ROLESPACE_OUT_DIR"); env && *env) config.out_dir = env;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed) config.seed = *seed;
    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "all")
      rolespace::run_all(config, std::cout);
    else
      rolespace::run_stage(stage, config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
