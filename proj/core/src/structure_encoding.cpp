#include "fedcigar/structure_encoding.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <cmath>

namespace fedcigar {

Matrix degree_encoding(const Graph& graph, int d_cap) {
  if (d_cap < 1) throw ConfigError("d_cap must be at least 1");
  const Eigen::Index n = graph.adjacency.rows();
  Matrix out = Matrix::Zero(n, d_cap + 1);
  const Vector deg = graph.degrees();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = static_cast<int>(std::lround(deg(i)));
    out(i, std::min(d, d_cap)) = 1.0;
  }
  return out;
}

// Each node's return probabilities come from propagating its indicator vector
// through P; only the j-th entry of P^k e_j is kept.
Matrix rwse(const Graph& graph, int k_rw) {
  if (k_rw < 1) throw ConfigError("K_rw must be at least 1");
  const Eigen::Index n = graph.adjacency.rows();
  const Vector deg = graph.degrees();
  Matrix transition = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (deg(i) > 0.0) transition.row(i) = graph.adjacency.row(i) / deg(i);

  // Rows of P^k are P^k applied from the left: walk = walk * P.
  Matrix out = Matrix::Zero(n, k_rw);
  Matrix walk = Matrix::Identity(n, n);
  for (int k = 0; k < k_rw; ++k) {
    walk = walk * transition;
    out.col(k) = walk.diagonal();
  }
  return out;
}

StructureEncoding build_structure_encoding(const Graph& graph, int d_cap, int k_rw) {
  StructureEncoding enc;
  enc.d_cap = d_cap;
  enc.k_rw = k_rw;
  enc.matrix.resize(graph.adjacency.rows(), d_cap + 1 + k_rw);
  enc.matrix << degree_encoding(graph, d_cap), rwse(graph, k_rw);
  return enc;
}

int max_degree(const std::vector<Graph>& graphs, int cap) {
  double best = 1.0;
  for (const auto& g : graphs)
    if (g.adjacency.size() > 0) best = std::max(best, g.degrees().maxCoeff());
  return std::min(static_cast<int>(std::lround(best)), cap);
}

}  // namespace fedcigar
