#pragma once

#include "fedcigar/graph.hpp"

#include <vector>

namespace fedcigar {

/// Per-node structure encoding: a one-hot degree block of width d_cap + 1
/// followed by K_rw random-walk return probabilities.
struct StructureEncoding {
  Matrix matrix;
  int d_cap = 0;
  int k_rw = 0;

  Eigen::Index width() const { return d_cap + 1 + k_rw; }
};

/// One-hot degree, clamped to `d_cap`.
Matrix degree_encoding(const Graph& graph, int d_cap);

/// Column k-1 holds diag(P^k) for k = 1..k_rw with P = D^-1 A. Rows of
/// isolated nodes are zero.
Matrix rwse(const Graph& graph, int k_rw);

StructureEncoding build_structure_encoding(const Graph& graph, int d_cap, int k_rw);

/// Maximum degree over a graph collection, capped at `cap`; at least 1.
int max_degree(const std::vector<Graph>& graphs, int cap = 50);

}  // namespace fedcigar
