#include "fedcigar/experiment.hpp"

#include "fedcigar/checkpoint.hpp"
#include "fedcigar/dataset_io.hpp"
#include "fedcigar/error.hpp"
#include "fedcigar/random.hpp"
#include "fedcigar/structure_encoding.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <map>
#include <thread>

namespace fedcigar {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) out.push_back(trim(part));
  return out;
}

// `<gen>*<count>+<gen>*<count>`; every graph gets `class_label`.
void append_synthetic(std::vector<Graph>& out, const std::string& text, int class_label,
                      std::uint64_t seed) {
  std::uint64_t component = 0;
  for (const auto& item : split(text, '+')) {
    const auto star = item.rfind('*');
    if (star == std::string::npos) throw ConfigError("synthetic source '" + item + "' lacks '*<count>'");
    const std::string count_text = trim(item.substr(star + 1));
    std::size_t count = 0;
    try {
      count = std::stoul(count_text);
    } catch (const std::exception&) {
      throw ConfigError("synthetic source '" + item + "': bad count '" + count_text + "'");
    }
    const GeneratorSpec spec = parse_generator_spec(trim(item.substr(0, star)));
    for (auto& g : generate_synthetic(spec, count, derive_seed(seed, {component++}))) {
      g.class_label = class_label;
      out.push_back(std::move(g));
    }
  }
}

std::vector<Graph> load_source(const std::string& source, const ExperimentConfig& config,
                               std::uint64_t index) {
  std::vector<Graph> graphs;
  if (source.rfind("tu:", 0) == 0) {
    const std::string rest = source.substr(3);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigError("dataset '" + source + "': expected tu:<root>:<NAME>");
    fs::path root = rest.substr(0, colon);
    const std::string name = rest.substr(colon + 1);
    if (root.is_relative()) root = config.base_dir / root;
    // Accept both <root>/<NAME>_A.txt and the usual <root>/<NAME>/<NAME>_A.txt.
    if (!fs::exists(root / (name + "_A.txt")) && fs::is_directory(root / name)) root /= name;
    graphs = parse_tudataset(root, name);
  } else if (source.rfind("synth:", 0) == 0) {
    const auto parts = split(source.substr(6), '/');
    if (parts.size() != 2)
      throw ConfigError("dataset '" + source + "': expected synth:<normal> / <anomalous>");
    const std::uint64_t seed = derive_seed(config.seed, {0x5e7, index});
    append_synthetic(graphs, parts[0], 1, derive_seed(seed, {1}));
    append_synthetic(graphs, parts[1], 0, derive_seed(seed, {0}));
  } else {
    throw ConfigError("dataset '" + source + "': unknown source kind (use tu: or synth:)");
  }
  return label_anomalies(std::move(graphs), config.anomaly_class);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

std::uint64_t client_train_seed(std::uint64_t seed, int round, int client) {
  return derive_seed(seed, {0x74, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client)});
}

std::uint64_t clustering_seed(std::uint64_t seed, int round) {
  return derive_seed(seed, {0x6b, static_cast<std::uint64_t>(round)});
}

std::uint64_t global_init_seed(std::uint64_t seed) { return derive_seed(seed, {0x67}); }

std::uint64_t gating_init_seed(std::uint64_t seed, int client) {
  return derive_seed(seed, {0x6c, static_cast<std::uint64_t>(client)});
}

FederatedDataset build_federated_dataset(const ExperimentConfig& config) {
  validate_config(config);
  const std::uint64_t split_seed = derive_seed(config.seed, {0x70});
  if (!config.multi_dataset) {
    return partition_single(load_source(config.datasets.front(), config, 0),
                            static_cast<std::size_t>(config.num_clients), config.train_fraction,
                            split_seed);
  }
  std::vector<NamedDataset> named;
  for (std::size_t i = 0; i < config.datasets.size(); ++i)
    named.emplace_back(config.datasets[i], load_source(config.datasets[i], config, i));
  return partition_multi(named, config.train_fraction, split_seed);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.config = config;
  const FederatedDataset data = build_federated_dataset(config);
  const int num_clients = static_cast<int>(data.clients.size());
  const int k = config.cluster_count();
  if (k > num_clients)
    throw ConfigError("clusters = " + std::to_string(k) + " exceeds " + std::to_string(num_clients) + " clients");

  // One structure width for every client so parameters can be averaged.
  if (config.d_cap > 0) {
    result.d_cap = config.d_cap;
  } else {
    std::vector<Graph> all_train;
    for (const auto& c : data.clients) all_train.insert(all_train.end(), c.train_normal.begin(), c.train_normal.end());
    result.d_cap = max_degree(all_train);
  }
  const bool no_se = config.ablation == Ablation::NoStructure;
  const EncodingOptions encoding{result.d_cap, config.k_rw, no_se};
  std::vector<PreparedClient> clients;
  for (const auto& c : data.clients) clients.push_back(prepare_client(c, encoding));

  ModelDims dims;
  dims.feature_dim = static_cast<int>(data.clients.front().feature_dim);
  dims.structure_dim = result.d_cap + 1 + config.k_rw;
  dims.hidden = config.hidden;
  dims.latent = config.latent;
  dims.layers = config.layers;
  result.dims = dims;

  if (config.ablation != Ablation::NoGate) {
    for (int c = 0; c < num_clients; ++c)
      result.gates.push_back(init_gating_params(dims.feature_dim, dims.structure_dim, !no_se,
                                                config.gate_hidden, config.gate_layers, config.tau,
                                                gating_init_seed(config.seed, c)));
  }

  const GlobalModelParams initial = init_global_params(dims, global_init_seed(config.seed));
  std::vector<GlobalModelParams> models(static_cast<std::size_t>(num_clients), initial);
  ClusterWindow window;
  window.max_length = static_cast<std::size_t>(config.window);
  window.silent_rounds = config.silent;
  window.theta = config.theta;
  result.final_assignment = {std::vector<int>(static_cast<std::size_t>(num_clients), 0), 1};

  for (int t = 1; t <= config.rounds; ++t) {
    std::vector<Bytes> uploads(static_cast<std::size_t>(num_clients));
    std::vector<double> losses(static_cast<std::size_t>(num_clients));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(num_clients));
    {
      std::vector<std::jthread> workers;
      for (int c = 0; c < num_clients; ++c) {
        workers.emplace_back([&, c] {
          const auto i = static_cast<std::size_t>(c);
          try {
            GlobalModelParams local = models[i];
            GatingParams* gate = result.gates.empty() ? nullptr : &result.gates[i];
            TrainOptions opts;
            opts.epochs = config.local_epochs;
            opts.lr = config.lr;
            opts.batch = config.batch;
            opts.alpha = config.alpha;
            opts.beta = config.beta;
            opts.seed = client_train_seed(config.seed, t, c);
            const TrainTrace trace = local_train(clients[i].train, local, gate, opts);
            losses[i] = trace.epoch_loss.back();
            ClientRound round;
            round.client_id = c;
            round.sample_count = clients[i].train.size();
            round.embedding = client_embedding(clients[i].train, local);
            round.params = std::move(local);
            uploads[i] = serialize_client_round(round);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        });
      }
    }
    for (int c = 0; c < num_clients; ++c) {
      if (!failures[static_cast<std::size_t>(c)]) continue;
      try {
        std::rethrow_exception(failures[static_cast<std::size_t>(c)]);
      } catch (const std::exception& e) {
        throw TrainingError("round " + std::to_string(t) + ", client " + std::to_string(c) + ": " + e.what());
      }
    }

    std::vector<ClientRound> received;
    for (const auto& bytes : uploads) received.push_back(deserialize_client_round(bytes));

    RoundRecord record;
    record.round = t;
    record.client_loss = losses;
    if (config.ablation == Ablation::NoCluster) {
      record.assignment = {std::vector<int>(static_cast<std::size_t>(num_clients), 0), 1};
    } else {
      Matrix embeddings(num_clients, received.front().embedding.size());
      for (int c = 0; c < num_clients; ++c) embeddings.row(c) = received[static_cast<std::size_t>(c)].embedding.transpose();
      const WindowStep step = window_step(window, embeddings, k, clustering_seed(config.seed, t));
      record.assignment = step.assignment;
      record.phase = step.phase;
      record.ran_kmeans = step.ran_kmeans;
      record.stability = step.stability;
      record.reset = step.reset;
    }
    result.bank = aggregate(received, record.assignment);
    models = broadcast(result.bank, record.assignment);
    result.final_assignment = record.assignment;
    result.rounds.push_back(std::move(record));
  }
  if (result.bank.empty()) result.bank.emplace(0, initial);

  std::vector<ClientMetrics> metrics;
  for (int c = 0; c < num_clients; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const GatingParams* gate = result.gates.empty() ? nullptr : &result.gates[i];
    std::vector<double> scores;
    std::vector<bool> labels;
    const auto scored = score_test_set(clients[i].test, models[i], gate, config.alpha, config.beta);
    for (std::size_t j = 0; j < scored.size(); ++j) {
      result.scores.push_back({c, j, scored[j].is_anomaly, scored[j].score});
      scores.push_back(scored[j].score);
      labels.push_back(scored[j].is_anomaly);
    }
    try {
      metrics.push_back(evaluate_client(c, scores, labels));
    } catch (const EvaluationError& e) {
      throw EvaluationError("client " + std::to_string(c) + ": " + e.what());
    }
  }
  result.report = macro_average(std::move(metrics));
  return result;
}

void write_round_log(std::ostream& os, const std::vector<RoundRecord>& rounds) {
  for (const auto& r : rounds) {
    nlohmann::json j;
    j["round"] = r.round;
    j["phase"] = phase_name(r.phase);
    j["did_run_kmeans"] = r.ran_kmeans;
    j["assignment"] = r.assignment.labels;
    j["k"] = r.assignment.k;
    j["stability"] = r.stability ? nlohmann::json(*r.stability) : nlohmann::json(nullptr);
    j["reset"] = r.reset;
    j["client_loss"] = r.client_loss;
    os << j.dump() << '\n';
  }
}

void write_scores(std::ostream& os, const std::vector<ScoreRecord>& scores) {
  os << "client\tindex\tis_anomaly\tscore\n";
  for (const auto& s : scores)
    os << s.client_id << '\t' << s.index << '\t' << (s.is_anomaly ? 1 : 0) << '\t' << fmt(s.score) << '\n';
}

void emit_plots(const std::vector<ScoreRecord>& scores, const std::vector<RoundRecord>& rounds,
                const fs::path& dir, int bins) {
  if (bins < 1) throw ConfigError("emit_plots: bins must be positive");
  make_dir(dir);
  {
    auto out = open_out(dir / "loss_curve.tsv");
    const std::size_t clients = rounds.empty() ? 0 : rounds.front().client_loss.size();
    out << "round\tmean_loss";
    for (std::size_t c = 0; c < clients; ++c) out << "\tclient_" << c;
    out << '\n';
    for (const auto& r : rounds) {
      double mean = 0.0;
      for (double l : r.client_loss) mean += l;
      if (!r.client_loss.empty()) mean /= static_cast<double>(r.client_loss.size());
      out << r.round << '\t' << fmt(mean);
      for (double l : r.client_loss) out << '\t' << fmt(l);
      out << '\n';
    }
    if (!out) throw IoError("failed writing " + (dir / "loss_curve.tsv").string());
  }
  auto out = open_out(dir / "score_hist.tsv");
  out << "client\tbin\tlo\thi\tnormal\tanomaly\n";
  std::map<int, std::vector<const ScoreRecord*>> by_client;
  for (const auto& s : scores) by_client[s.client_id].push_back(&s);
  for (const auto& [client, list] : by_client) {
    double lo = list.front()->score;
    double hi = lo;
    for (const auto* s : list) {
      lo = std::min(lo, s->score);
      hi = std::max(hi, s->score);
    }
    const double width = (hi - lo) / bins;
    std::vector<int> normal(static_cast<std::size_t>(bins), 0);
    std::vector<int> anomalous(static_cast<std::size_t>(bins), 0);
    for (const auto* s : list) {
      int b = width > 0.0 ? static_cast<int>((s->score - lo) / width) : 0;
      b = std::clamp(b, 0, bins - 1);
      ++(s->is_anomaly ? anomalous : normal)[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b)
      out << client << '\t' << b << '\t' << fmt(lo + b * width) << '\t' << fmt(lo + (b + 1) * width)
          << '\t' << normal[static_cast<std::size_t>(b)] << '\t' << anomalous[static_cast<std::size_t>(b)] << '\n';
  }
  if (!out) throw IoError("failed writing " + (dir / "score_hist.tsv").string());
}

void write_artifacts(const ExperimentResult& result, const fs::path& dir) {
  make_dir(dir);
  {
    auto out = open_out(dir / "report.txt");
    write_config(out, result.config, "# ");
    out << "# d_cap_effective = " << result.d_cap << '\n';
    write_eval_report(out, result.report);
  }
  {
    auto out = open_out(dir / "round_log.jsonl");
    write_round_log(out, result.rounds);
  }
  {
    auto out = open_out(dir / "scores.tsv");
    write_scores(out, result.scores);
  }
  emit_plots(result.scores, result.rounds, dir);
  const fs::path ckpt = dir / "checkpoints";
  make_dir(ckpt);
  for (const auto& [cluster, params] : result.bank)
    save_checkpoint(ckpt / ("cluster_" + std::to_string(cluster) + ".fcgk"),
                    GlobalCheckpoint{params, result.config.seed});
  for (std::size_t c = 0; c < result.gates.size(); ++c)
    save_checkpoint(ckpt / ("gate_client_" + std::to_string(c) + ".fcgl"),
                    GatingCheckpoint{result.gates[c], result.config.seed});
}

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "variant\tmacro_auc\tmacro_f1\n";
  for (const auto& r : rows)
    os << ablation_name(r.variant) << '\t' << fmt(r.report.macro_auc) << '\t' << fmt(r.report.macro_f1) << '\n';
}

void write_sweep_table(std::ostream& os, const std::string& param, const std::vector<SweepRow>& rows) {
  os << param << "\tmacro_auc\tmacro_f1\n";
  for (const auto& r : rows) os << r.value << '\t' << fmt(r.report.macro_auc) << '\t' << fmt(r.report.macro_f1) << '\n';
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const fs::path& dir) {
  std::vector<AblationRow> rows;
  for (Ablation a : {Ablation::None, Ablation::NoStructure, Ablation::NoGate, Ablation::NoCluster}) {
    ExperimentConfig variant = config;
    variant.ablation = a;
    const ExperimentResult result = run_experiment(variant);
    write_artifacts(result, dir / ablation_name(a));
    rows.push_back({a, result.report});
  }
  make_dir(dir);
  auto out = open_out(dir / "ablation.tsv");
  write_ablation_table(out, rows);
  return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& param,
                                const std::vector<std::string>& values, const fs::path& dir) {
  if (values.empty()) throw ConfigError("sweep: no values given for '" + param + "'");
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    ExperimentConfig variant = config;
    set_config_value(variant, param, value);
    validate_config(variant);
    const ExperimentResult result = run_experiment(variant);
    write_artifacts(result, dir / ("sweep_" + param) / (param + "=" + value));
    rows.push_back({value, result.report});
  }
  make_dir(dir);
  auto out = open_out(dir / ("sweep_" + param + ".tsv"));
  write_sweep_table(out, param, rows);
  return rows;
}

}  // namespace fedcigar
