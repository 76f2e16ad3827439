#include "ctql/commands.hpp"
#include "ctql/dynamics.hpp"
#include "ctql/learner.hpp"
#include "ctql/run_config.hpp"
#include "ctql/sampling.hpp"
#include "ctql/text_format.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

ctql::State parse_x0(const std::string& text) {
  const std::vector<std::string> parts = ctql::split(text, ',');
  ctql::State x0(static_cast<Eigen::Index>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) {
    x0(static_cast<Eigen::Index>(i)) = ctql::parse_double(parts[i], "--x0");
  }
  return x0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time Q-learning for sampled feedback control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string dataset_path = "dataset.txt";
  std::string model_path = "model.txt";
  std::string x0_text;
  double horizon = 0.0;
  std::uint64_t seed = 0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  };

  CLI::App* collect = app.add_subcommand("collect", "sample transitions into a dataset");
  add_common(collect);
  CLI::Option* seed_opt =
      collect->add_option("--seed", seed, "override the sampling seed from the config");

  CLI::App* train = app.add_subcommand("train", "fit a Q-function to a dataset");
  add_common(train);
  train->add_option("-d,--dataset", dataset_path, "dataset file from 'collect'")
      ->capture_default_str()
      ->check(CLI::ExistingFile);

  CLI::App* evaluate = app.add_subcommand("evaluate", "simulate a trained greedy policy");
  add_common(evaluate);
  evaluate->add_option("-m,--model", model_path, "model file from 'train'")
      ->capture_default_str()
      ->check(CLI::ExistingFile);
  CLI::Option* x0_opt = evaluate->add_option(
      "--x0", x0_text, "initial state as comma-separated values, e.g. 1,0,0");
  CLI::Option* horizon_opt =
      evaluate->add_option("--horizon", horizon, "simulation horizon in seconds");

  CLI::App* oracle = app.add_subcommand(
      "oracle", "Riccati ground truth for the configured linear model");
  add_common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ctql::kExitOk : ctql::kExitValidation;
  }

  try {
    ctql::RunConfig config = ctql::RunConfig::from_file(config_path);
    if (collect->parsed()) {
      if (seed_opt->count() > 0) config.seed = seed;
      return ctql::cmd_collect(config, out_dir, std::cout);
    }
    if (train->parsed()) {
      return ctql::cmd_train(config, dataset_path, out_dir, std::cout);
    }
    if (evaluate->parsed()) {
      std::optional<ctql::State> x0;
      if (x0_opt->count() > 0) x0 = parse_x0(x0_text);
      std::optional<double> horizon_override;
      if (horizon_opt->count() > 0) horizon_override = horizon;
      return ctql::cmd_evaluate(config, model_path, x0, horizon_override, out_dir,
                                std::cout);
    }
    return ctql::cmd_oracle(config, out_dir, std::cout);
  } catch (const ctql::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ctql::kExitValidation;
  } catch (const ctql::DatasetFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ctql::kExitValidation;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ctql::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ctql::kExitNumerical;
  }
}
