#include "fedcigar/gating.hpp"

#include "fedcigar/error.hpp"

namespace fedcigar {

GatingParams init_gating_params(int feature_dim, int structure_dim, bool uses_structure,
                                int hidden, int layers, double tau, std::uint64_t seed) {
  if (!(tau > 0.0)) throw ConfigError("gating temperature tau must be positive");
  GatingParams p;
  p.tau = tau;
  p.uses_structure = uses_structure;
  const int in = feature_dim + (uses_structure ? structure_dim : 0);
  p.lpm = init_gcn_stack("lpm", in, hidden, 1, layers, seed);
  return p;
}

std::vector<ad::Tensor*> GatingParams::tensors() {
  std::vector<ad::Tensor*> out;
  for (auto& t : lpm) out.push_back(&t);
  return out;
}

std::vector<const ad::Tensor*> GatingParams::tensors() const {
  std::vector<const ad::Tensor*> out;
  for (const auto& t : lpm) out.push_back(&t);
  return out;
}

Matrix gating_input(const PreparedGraph& graph, bool uses_structure) {
  if (!uses_structure) return graph.features;
  Matrix x(graph.features.rows(), graph.features.cols() + graph.structure.cols());
  x << graph.features, graph.structure;
  return x;
}

ad::Var node_weights(ad::Tape& tape, const PreparedGraph& graph, GatingParams& params) {
  const Matrix input = gating_input(graph, params.uses_structure);
  if (input.cols() != params.input_dim())
    throw DimensionError("node_weights: gating input width " + std::to_string(input.cols()) +
                         " != LPM input " + std::to_string(params.input_dim()));
  const ad::Var logits =
      gcn_stack(tape, tape.constant(input), tape.constant(graph.propagation), params.lpm);
  const ad::Var raw = ad::sigmoid(ad::scale(logits, 1.0 / params.tau));
  const double n = static_cast<double>(graph.features.rows());
  return ad::mul(raw, ad::div(tape.constant(Matrix::Constant(1, 1, n)), ad::sum(raw)));
}

ad::Var gated_loss(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& global,
                   GatingParams* gating, double alpha, double beta) {
  const ReconOutput recon = reconstruct(tape, graph, global);
  if (gating == nullptr) return loss_and_score(recon, std::nullopt, alpha, beta);
  return loss_and_score(recon, node_weights(tape, graph, *gating), alpha, beta);
}

}  // namespace fedcigar
