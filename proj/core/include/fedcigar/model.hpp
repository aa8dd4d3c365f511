#pragma once

// Feature-structure joint reconstruction model.
//
// Two bias-free GCN stacks encode node features and the structure encoding
// over the same adjacency. A one-hidden-layer MLP fuses both channels into a
// latent matrix Z; a GCN stack decodes features from Z and sigmoid(Z Z^T)
// reconstructs the adjacency. The loss below doubles as the anomaly score.

#include "fedcigar/autodiff.hpp"
#include "fedcigar/graph.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fedcigar {

struct ModelDims {
  int feature_dim = 1;
  int structure_dim = 1;
  int hidden = 64;
  int latent = 32;
  int layers = 2;  // GCN layers per encoder/decoder block

  bool operator==(const ModelDims&) const = default;
};

/// Shared (aggregated) parameters. The structure decoder is parameter-free.
struct GlobalModelParams {
  ModelDims dims;
  std::vector<ad::Tensor> enc_f;
  std::vector<ad::Tensor> enc_s;
  std::vector<ad::Tensor> fusion;  // w1, b1, w2, b2
  std::vector<ad::Tensor> dec_f;

  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
  std::size_t parameter_count() const;
};

/// Xavier-uniform weights, zero biases.
GlobalModelParams init_global_params(const ModelDims& dims, std::uint64_t seed);

/// Xavier-uniform GCN stack in -> hidden -> ... -> out with `layers` weights.
std::vector<ad::Tensor> init_gcn_stack(const std::string& prefix, int in, int hidden, int out,
                                       int layers, std::uint64_t seed);

struct EncodingOptions {
  int d_cap = 8;
  int k_rw = 16;
  /// Replace the structure encoding by zeros (the no-structure ablation).
  bool zero_structure = false;
};

/// Per-graph inputs computed once: structure encoding and the symmetric
/// normalized propagation matrix D~^-1/2 (A + I) D~^-1/2.
struct PreparedGraph {
  Matrix adjacency;
  Matrix features;
  Matrix structure;
  Matrix propagation;
  bool is_anomaly = false;
};

Matrix gcn_propagation(const Matrix& adjacency);
PreparedGraph prepare_graph(const Graph& graph, const EncodingOptions& options);

/// propagation * H * W, followed by relu when `activate`.
ad::Var gcn_layer(const ad::Var& h, const ad::Var& propagation, const ad::Var& weight,
                  bool activate);

/// Applies a GCN stack; every layer but the last is followed by relu.
ad::Var gcn_stack(ad::Tape& tape, const ad::Var& input, const ad::Var& propagation,
                  std::vector<ad::Tensor>& layers);

struct Encoded {
  ad::Var h_f;
  ad::Var h_s;
};

Encoded encode(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& params);

struct ReconOutput {
  ad::Var z;      // n x latent
  ad::Var x_hat;  // n x m
  ad::Var a_hat;  // n x n probabilities
  ad::Var l_x;    // n x 1 cosine errors in [0, 2]
  ad::Var l_a;    // n x n binary cross-entropy, >= 0
};

/// Z = MLP(concat[H_f, H_s]).
ad::Var fuse(ad::Tape& tape, const Encoded& encoded, GlobalModelParams& params);

ReconOutput fuse_and_decode(ad::Tape& tape, const Encoded& encoded, const PreparedGraph& graph,
                            GlobalModelParams& params);

/// encode followed by fuse_and_decode.
ReconOutput reconstruct(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& params);

/// 1 - cos(x_i, x_hat_i) per row; a row with norm below 1e-12 on either side
/// contributes 1.
ad::Var feature_error(const ad::Var& x_hat, const ad::Var& x);

/// Entry-wise -[A log A_hat + (1 - A) log(1 - A_hat)] over all n^2 pairs with
/// A_hat clamped to [1e-7, 1 - 1e-7].
ad::Var adjacency_error(const ad::Var& a_hat, const ad::Var& adjacency);

/// alpha * (avg(l_x) + beta * std(l_x)) + (1 - alpha) * (avg(L_a) + beta * std(L_a)).
/// With node weights w (n x 1), l_x is replaced by l_x * w and L_a by L_a * w w^T.
ad::Var loss_and_score(const ReconOutput& recon, const std::optional<ad::Var>& weights,
                       double alpha, double beta);

/// Mean pooling of the rows of Z.
Vector readout(const Matrix& z);

inline constexpr double kStdEpsilon = 1e-8;
inline constexpr double kProbClamp = 1e-7;
inline constexpr double kZeroRowNorm = 1e-12;

}  // namespace fedcigar
