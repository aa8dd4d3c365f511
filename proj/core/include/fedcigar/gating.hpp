#pragma once

// Client-local node contribution gating. A small GCN (the local personalized
// model) maps concat(X, S) to one logit per node; weights are
// sigmoid(logit / tau) rescaled to mean 1 and reweight the reconstruction
// errors before the loss statistics are taken. These parameters never leave
// the client.

#include "fedcigar/autodiff.hpp"
#include "fedcigar/model.hpp"

#include <cstdint>
#include <vector>

namespace fedcigar {

struct GatingParams {
  std::vector<ad::Tensor> lpm;
  double tau = 1.0;
  /// Whether the structure encoding is part of the gating input.
  bool uses_structure = true;

  int input_dim() const { return lpm.empty() ? 0 : static_cast<int>(lpm.front().rows()); }
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
};

GatingParams init_gating_params(int feature_dim, int structure_dim, bool uses_structure,
                                int hidden, int layers, double tau, std::uint64_t seed);

/// Gating input X' = concat(X, S), or X alone when structure is excluded.
Matrix gating_input(const PreparedGraph& graph, bool uses_structure);

/// n x 1 weights with mean exactly 1 up to rounding; differentiable in the
/// gating parameters.
ad::Var node_weights(ad::Tape& tape, const PreparedGraph& graph, GatingParams& params);

/// Reconstruction loss with gated node weights. With `gating` == nullptr the
/// ungated loss is returned.
ad::Var gated_loss(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& global,
                   GatingParams* gating, double alpha, double beta);

}  // namespace fedcigar
