// fedcigar command line: run / ablate / sweep / inspect.

#include "fedcigar/checkpoint.hpp"
#include "fedcigar/config.hpp"
#include "fedcigar/error.hpp"
#include "fedcigar/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_summary(const fedcigar::EvalReport& report) {
  fedcigar::write_eval_report(std::cout, report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated graph-level anomaly detection experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_override, "root directory for run outputs");
  };

  auto* run = app.add_subcommand("run", "train, evaluate and write artifacts");
  add_common(run);

  auto* ablate = app.add_subcommand("ablate", "run the full model and each ablation");
  add_common(ablate);

  auto* sweep = app.add_subcommand("sweep", "one run per value of a config key");
  add_common(sweep);
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("param", param, "config key to vary")->required();
  sweep->add_option("values", values, "values, space or comma separated")->required();

  auto* inspect = app.add_subcommand("inspect", "describe a checkpoint file");
  std::string checkpoint;
  inspect->add_option("checkpoint", checkpoint, "checkpoint path")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*inspect) {
      fedcigar::describe_checkpoint(std::cout, fedcigar::load_checkpoint(checkpoint));
      return 0;
    }

    fedcigar::ExperimentConfig config = fedcigar::load_config(config_path);
    if (!output_override.empty()) config.output_dir = output_override;
    const auto dir = config.run_dir();

    if (*run) {
      const auto result = fedcigar::run_experiment(config);
      fedcigar::write_artifacts(result, dir);
      print_summary(result.report);
    } else if (*ablate) {
      const auto rows = fedcigar::run_ablation(config, dir);
      fedcigar::write_ablation_table(std::cout, rows);
    } else if (*sweep) {
      std::vector<std::string> flat;
      for (const auto& v : values)
        for (auto& item : split_values(v)) flat.push_back(std::move(item));
      const auto rows = fedcigar::run_sweep(config, param, flat, dir);
      fedcigar::write_sweep_table(std::cout, param, rows);
    }
    std::cerr << "outputs in " << dir.string() << '\n';
  } catch (const fedcigar::Error& e) {
    std::cerr << "fedcigar: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fedcigar: unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
