#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mft/errors.hpp"
#include "mft/runner.hpp"
#include "mft/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Many-fingered-time Bohmian simulator"};
  app.set_version_flag("--version", mft::kToolVersion);

  std::string command;
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  mft::RunOptions options;

  app.add_option("command", command, "simulate | equivariance | collapse | sensitivity | "
                                     "epr-scan | newton-check | residuals | validate")
      ->required()
      ->check(CLI::IsMember(mft::commands()));
  app.add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (default ./out)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the sampler seed");
  app.add_flag("--plots", options.plots, "Write a gnuplot script next to every CSV");
  app.add_option("--threads", options.threads, "Worker threads (0 = one per core)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mft::kExitIoError;
  }

  for (int k = 0; k < argc; ++k) {
    if (k > 0) options.command_line += ' ';
    options.command_line += argv[k];
  }
  if (seed_opt->count() > 0) options.seed = seed;

  mft::Scenario scenario = [&]() -> mft::Scenario {
    try {
      return mft::load_scenario(scenario_path);
    } catch (const mft::ParseError& e) {
      std::cerr << "error: " << scenario_path << ": " << e.what() << "\n";
    } catch (const mft::ValidationError& e) {
      std::cerr << "error: " << scenario_path << ": invalid scenario: " << e.what() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
    }
    std::exit(mft::kExitIoError);
  }();

  if (out_opt->count() > 0) {
    options.out_dir = out_dir;
  } else if (!scenario.output_dir.empty()) {
    options.out_dir = scenario.output_dir;
  } else {
    options.out_dir = "out";
  }
  return mft::run(command, std::move(scenario), options, std::cout, std::cerr);
}
