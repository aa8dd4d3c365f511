#pragma once

// Client runtime: local training on normal graphs, the client embedding sent
// to the server, and test-set scoring. Nothing here ever reads a test graph
// during training: local_train and client_embedding only see the training
// split.

#include "fedcigar/gating.hpp"
#include "fedcigar/graph.hpp"
#include "fedcigar/model.hpp"
#include "fedcigar/serialize.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fedcigar {

/// A client's data with structure encodings precomputed.
struct PreparedClient {
  int client_id = 0;
  std::vector<PreparedGraph> train;
  std::vector<PreparedGraph> test;
};

PreparedClient prepare_client(const ClientDataset& dataset, const EncodingOptions& options);

struct TrainOptions {
  int epochs = 1;
  double lr = 1e-3;
  int batch = 16;
  double alpha = 0.5;
  double beta = 0.5;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean loss over graphs, one entry per epoch
};

/// Adam over shuffled mini-batches minimizing the gated loss (ungated when
/// `gating` is null). Updates both parameter sets in place. Deterministic
/// for a fixed seed.
TrainTrace local_train(std::span<const PreparedGraph> train, GlobalModelParams& global,
                       GatingParams* gating, const TrainOptions& options);

/// Mean loss over `graphs` without updating anything.
double mean_loss(std::span<const PreparedGraph> graphs, const GlobalModelParams& global,
                 const GatingParams* gating, double alpha, double beta);

/// Mean-pooled latent representation of each graph (rows of the result).
Matrix graph_representations(std::span<const PreparedGraph> graphs, const GlobalModelParams& global);

/// [coordinate-wise mean | max | min] of the training graph representations.
Vector client_embedding(std::span<const PreparedGraph> train, const GlobalModelParams& global);

struct ScoredGraph {
  double score = 0.0;
  bool is_anomaly = false;
};

/// Anomaly score per test graph, in input order. Larger means more anomalous.
std::vector<ScoredGraph> score_test_set(std::span<const PreparedGraph> test,
                                        const GlobalModelParams& global, const GatingParams* gating,
                                        double alpha, double beta);

/// The per-round upload. Holds no graph data.
struct ClientRound {
  int client_id = 0;
  GlobalModelParams params;
  std::size_t sample_count = 0;
  Vector embedding;
};

/// "FCGR" | u32 client_id | u64 sample_count | u32 latent | u32 embedding_len |
/// f64[embedding_len] | parameter blob
Bytes serialize_client_round(const ClientRound& round);
ClientRound deserialize_client_round(std::span<const std::uint8_t> bytes);

}  // namespace fedcigar
