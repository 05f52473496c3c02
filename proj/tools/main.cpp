#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cconv/cli.hpp"
#include "cconv/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"c-convexity and alternative c-convexity toolkit"};
  std::string command, config_path, output;
  long seed = -1;
  double budget_scale = 1.0;
  app.add_option("command", command, "analyze | chord | envelope | check-convexity | counterexample | constants")
      ->required()
      ->check(CLI::IsMember(cconv::commands()));
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "overrides the config seed")->check(CLI::NonNegativeNumber);
  app.add_option("--output", output, "output directory (overrides output_dir)");
  app.add_option("--budget-scale", budget_scale, "multiplies every budgets.* entry")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    cconv::RunConfig cfg = config_path.empty() ? cconv::RunConfig::defaults() : cconv::RunConfig::load(config_path);
    if (seed >= 0) cfg.set("seed", std::to_string(seed));
    if (!output.empty()) cfg.set("output_dir", output);
    if (budget_scale != 1.0) {
      for (const auto& [key, value] : cconv::config_keys()) {
        if (key.rfind("budgets.", 0) != 0 || key == "budgets.loeper_t_grid") continue;
        const long scaled = std::max(1L, std::lround(static_cast<double>(cfg.integer(key)) * budget_scale));
        cfg.set(key, std::to_string(scaled));
      }
    }
    return cconv::run_to_directory(command, cfg, std::cout, std::cerr);
  } catch (const cconv::Error& e) {
    std::cerr << "error in stage config: " << e.what() << "\n";
    return 1;
  }
}
