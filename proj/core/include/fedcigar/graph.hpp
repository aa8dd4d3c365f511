#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace fedcigar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One graph instance. The adjacency is dense, symmetric, 0/1 with a zero
/// diagonal; features has one row per node.
struct Graph {
  Matrix adjacency;
  Matrix features;
  int class_label = 0;
  bool is_anomaly = false;

  std::size_t num_nodes() const { return static_cast<std::size_t>(adjacency.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_edges() const;
  Vector degrees() const;
};

/// Throws DimensionError when the Graph invariants do not hold.
void validate_graph(const Graph& graph);

/// Applies a node permutation: node i of the result is node perm[i] of `graph`.
Graph permute_graph(const Graph& graph, const std::vector<std::size_t>& perm);

struct ClientDataset {
  int client_id = 0;
  std::vector<Graph> train_normal;
  std::vector<Graph> test;
  std::size_t feature_dim = 0;
};

enum class Scenario { SingleDataset, MultiDataset };

struct FederatedDataset {
  std::vector<ClientDataset> clients;
  Scenario scenario = Scenario::SingleDataset;
};

}  // namespace fedcigar
