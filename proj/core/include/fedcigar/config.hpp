#pragma once

// Experiment configuration: a flat `key = value` text file, `#` starts a
// comment. Unknown or repeated keys are errors.
//
// Dataset sources:
//   tu:<root>:<NAME>                 TUDataset files <root>[/<NAME>]/<NAME>_*.txt
//   synth:<gen>*<count>+... / <gen>*<count>+...
//                                    generated graphs; the part before `/`
//                                    is normal (class 1), the part after it
//                                    anomalous (class 0)
// e.g. `synth:cycle(10..14)*100 / clique(10..14)*20`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fedcigar {

enum class Ablation { None, NoStructure, NoGate, NoCluster };

const char* ablation_name(Ablation a);

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::string> datasets;  // one entry, or one per client in the multi scenario
  bool multi_dataset = false;
  int num_clients = 3;
  int rounds = 20;
  int local_epochs = 1;
  double lr = 1e-3;
  int batch = 16;
  double alpha = 0.5;
  double beta = 0.5;
  double tau = 1.0;
  int clusters = 0;  // 0: min(4, C)
  int window = 5;
  int silent = 10;
  double theta = 0.5;
  int d_cap = 0;  // 0: largest training degree, capped at 50
  int k_rw = 16;
  int hidden = 64;
  int latent = 32;
  int layers = 2;
  int gate_hidden = 32;
  int gate_layers = 2;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::None;
  double train_fraction = 0.8;
  std::optional<int> anomaly_class;  // unset: smallest class label
  std::filesystem::path output_dir = "runs";
  /// Directory relative dataset roots are resolved against.
  std::filesystem::path base_dir = ".";

  int client_count() const;
  int cluster_count() const;
  std::filesystem::path run_dir() const { return output_dir / name; }
};

/// Sets one key from its textual value. Throws ConfigError on an unknown key
/// or a malformed or out-of-range value.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// Reads a config file. The run name defaults to the file stem and relative
/// dataset roots resolve against the file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value, one `key = value` per line.
void write_config(std::ostream& os, const ExperimentConfig& config, const std::string& prefix = "");

/// Range checks across keys.
void validate_config(const ExperimentConfig& config);

}  // namespace fedcigar
