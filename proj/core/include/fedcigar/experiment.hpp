#pragma once

// Config-driven experiment runner. One run builds the federated dataset,
// plays `rounds` rounds of broadcast -> local training -> embedding ->
// clustering -> aggregation, then scores every client's test split with its
// cluster model and its own gating parameters.

#include "fedcigar/client.hpp"
#include "fedcigar/config.hpp"
#include "fedcigar/gating.hpp"
#include "fedcigar/metrics.hpp"
#include "fedcigar/server.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fedcigar {

/// Materializes the configured datasets with anomaly flags set and splits
/// them over clients.
FederatedDataset build_federated_dataset(const ExperimentConfig& config);

/// Seed for client `client`'s local training in round `round` (1-based).
std::uint64_t client_train_seed(std::uint64_t seed, int round, int client);
/// Seed for the server's clustering in round `round`.
std::uint64_t clustering_seed(std::uint64_t seed, int round);
/// Seed of the shared initial model.
std::uint64_t global_init_seed(std::uint64_t seed);
std::uint64_t gating_init_seed(std::uint64_t seed, int client);

struct RoundRecord {
  int round = 0;
  WindowPhase phase = WindowPhase::Update;
  bool ran_kmeans = false;
  ClusterAssignment assignment;
  std::optional<double> stability;
  bool reset = false;
  std::vector<double> client_loss;  // last local epoch, per client
};

struct ScoreRecord {
  int client_id = 0;
  std::size_t index = 0;  // position in the client's test split
  bool is_anomaly = false;
  double score = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  ModelDims dims;
  int d_cap = 0;
  EvalReport report;
  std::vector<RoundRecord> rounds;
  std::vector<ScoreRecord> scores;
  ClusterAssignment final_assignment;
  ClusterModelBank bank;
  std::vector<GatingParams> gates;  // empty under no_gate
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes report.txt, round_log.jsonl, scores.tsv, plot data and
/// checkpoints into `dir`.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

void write_round_log(std::ostream& os, const std::vector<RoundRecord>& rounds);
void write_scores(std::ostream& os, const std::vector<ScoreRecord>& scores);

/// loss_curve.tsv (one row per round) and score_hist.tsv (per client score
/// histogram, `bins` equal-width bins).
void emit_plots(const std::vector<ScoreRecord>& scores, const std::vector<RoundRecord>& rounds,
                const std::filesystem::path& dir, int bins = 20);

struct AblationRow {
  Ablation variant = Ablation::None;
  EvalReport report;
};

/// Runs the full model and each ablation on the same config; each variant
/// writes its artifacts to `dir/<variant>` and a side-by-side table goes to
/// `dir/ablation.tsv`.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const std::filesystem::path& dir);

struct SweepRow {
  std::string value;
  EvalReport report;
};

/// One run per value of `param`; writes `dir/sweep_<param>.tsv`.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& param,
                                const std::vector<std::string>& values,
                                const std::filesystem::path& dir);

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows);
void write_sweep_table(std::ostream& os, const std::string& param, const std::vector<SweepRow>& rows);

}  // namespace fedcigar
