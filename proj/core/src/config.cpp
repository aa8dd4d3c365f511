#include "fedcigar/config.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fedcigar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

int parse_int(const std::string& key, const std::string& value, int lo) {
  const int v = parse_number<int>(key, value);
  if (v < lo) throw ConfigError("config key '" + key + "' must be >= " + std::to_string(lo));
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoStructure: return "no_se";
    case Ablation::NoGate: return "no_gate";
    case Ablation::NoCluster: return "no_cluster";
  }
  return "none";
}

int ExperimentConfig::client_count() const {
  return multi_dataset ? static_cast<int>(datasets.size()) : num_clients;
}

int ExperimentConfig::cluster_count() const {
  if (ablation == Ablation::NoCluster) return 1;
  return clusters > 0 ? clusters : std::min(4, client_count());
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "name") {
    if (value.empty() || value.find('/') != std::string::npos)
      throw ConfigError("config key 'name' must be a non-empty file name");
    c.name = value;
  } else if (key == "dataset") {
    c.datasets.assign(1, value);
  } else if (key.rfind("dataset.", 0) == 0) {
    const int idx = parse_int(key, key.substr(8), 0);
    if (static_cast<std::size_t>(idx) != c.datasets.size())
      throw ConfigError("config key '" + key + "': dataset.N keys must be numbered 0, 1, ... in order");
    c.datasets.push_back(value);
  } else if (key == "scenario") {
    if (value == "single") c.multi_dataset = false;
    else if (value == "multi") c.multi_dataset = true;
    else throw ConfigError("config key 'scenario' must be single or multi, got '" + value + "'");
  } else if (key == "num_clients") {
    c.num_clients = parse_int(key, value, 1);
  } else if (key == "rounds") {
    c.rounds = parse_int(key, value, 0);
  } else if (key == "local_epochs") {
    c.local_epochs = parse_int(key, value, 1);
  } else if (key == "lr") {
    c.lr = parse_number<double>(key, value);
    if (!(c.lr > 0.0)) throw ConfigError("config key 'lr' must be positive");
  } else if (key == "batch") {
    c.batch = parse_int(key, value, 1);
  } else if (key == "alpha") {
    c.alpha = parse_number<double>(key, value);
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw ConfigError("config key 'alpha' must lie in [0, 1]");
  } else if (key == "beta") {
    c.beta = parse_number<double>(key, value);
    if (!(c.beta >= 0.0)) throw ConfigError("config key 'beta' must be >= 0");
  } else if (key == "tau") {
    c.tau = parse_number<double>(key, value);
    if (!(c.tau > 0.0)) throw ConfigError("config key 'tau' must be positive");
  } else if (key == "clusters") {
    c.clusters = parse_int(key, value, 0);
  } else if (key == "window") {
    c.window = parse_int(key, value, 1);
  } else if (key == "silent") {
    c.silent = parse_int(key, value, 0);
  } else if (key == "theta") {
    c.theta = parse_number<double>(key, value);
    if (!(c.theta >= -1.0 && c.theta <= 1.0)) throw ConfigError("config key 'theta' must lie in [-1, 1]");
  } else if (key == "d_cap") {
    c.d_cap = value == "auto" ? 0 : parse_int(key, value, 0);
  } else if (key == "k_rw") {
    c.k_rw = parse_int(key, value, 1);
  } else if (key == "hidden") {
    c.hidden = parse_int(key, value, 1);
  } else if (key == "latent") {
    c.latent = parse_int(key, value, 1);
  } else if (key == "layers") {
    c.layers = parse_int(key, value, 1);
  } else if (key == "gate_hidden") {
    c.gate_hidden = parse_int(key, value, 1);
  } else if (key == "gate_layers") {
    c.gate_layers = parse_int(key, value, 1);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "ablation") {
    if (value == "none") c.ablation = Ablation::None;
    else if (value == "no_se") c.ablation = Ablation::NoStructure;
    else if (value == "no_gate") c.ablation = Ablation::NoGate;
    else if (value == "no_cluster") c.ablation = Ablation::NoCluster;
    else throw ConfigError("config key 'ablation' must be none, no_se, no_gate or no_cluster");
  } else if (key == "train_fraction") {
    c.train_fraction = parse_number<double>(key, value);
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
      throw ConfigError("config key 'train_fraction' must lie in (0, 1)");
  } else if (key == "anomaly_class") {
    if (value == "auto") c.anomaly_class.reset();
    else c.anomaly_class = parse_number<int>(key, value);
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(source, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw FormatError(source, lineno, "duplicate key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw FormatError(source, lineno, e.what());
    }
  }
  validate_config(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // The file stem names the run unless the file says otherwise.
  ExperimentConfig defaults;
  ExperimentConfig config = parse_config(text, path.string());
  if (config.name == defaults.name) config.name = path.stem().string();
  config.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  return config;
}

void write_config(std::ostream& os, const ExperimentConfig& c, const std::string& prefix) {
  auto line = [&](const std::string& k, const std::string& v) { os << prefix << k << " = " << v << '\n'; };
  line("name", c.name);
  if (c.multi_dataset) {
    for (std::size_t i = 0; i < c.datasets.size(); ++i) line("dataset." + std::to_string(i), c.datasets[i]);
  } else if (!c.datasets.empty()) {
    line("dataset", c.datasets.front());
  }
  line("scenario", c.multi_dataset ? "multi" : "single");
  line("num_clients", std::to_string(c.client_count()));
  line("rounds", std::to_string(c.rounds));
  line("local_epochs", std::to_string(c.local_epochs));
  line("lr", fmt(c.lr));
  line("batch", std::to_string(c.batch));
  line("alpha", fmt(c.alpha));
  line("beta", fmt(c.beta));
  line("tau", fmt(c.tau));
  line("clusters", std::to_string(c.cluster_count()));
  line("window", std::to_string(c.window));
  line("silent", std::to_string(c.silent));
  line("theta", fmt(c.theta));
  line("d_cap", c.d_cap == 0 ? "auto" : std::to_string(c.d_cap));
  line("k_rw", std::to_string(c.k_rw));
  line("hidden", std::to_string(c.hidden));
  line("latent", std::to_string(c.latent));
  line("layers", std::to_string(c.layers));
  line("gate_hidden", std::to_string(c.gate_hidden));
  line("gate_layers", std::to_string(c.gate_layers));
  line("seed", std::to_string(c.seed));
  line("ablation", ablation_name(c.ablation));
  line("train_fraction", fmt(c.train_fraction));
  line("anomaly_class", c.anomaly_class ? std::to_string(*c.anomaly_class) : "auto");
}

void validate_config(const ExperimentConfig& c) {
  if (c.datasets.empty()) throw ConfigError("config: no dataset given");
  if (c.multi_dataset && c.datasets.size() < 2)
    throw ConfigError("config: the multi scenario needs dataset.0, dataset.1, ...");
  if (!c.multi_dataset && c.datasets.size() != 1)
    throw ConfigError("config: the single scenario takes exactly one 'dataset'");
  if (c.clusters > c.client_count())
    throw ConfigError("config: clusters = " + std::to_string(c.clusters) + " exceeds " +
                      std::to_string(c.client_count()) + " clients");
}

}  // namespace fedcigar
