#pragma once

// Server runtime: k-means over client embeddings, the sliding-window
// stability protocol that decides when to re-cluster, and cluster-wise
// weighted aggregation.

#include "fedcigar/client.hpp"
#include "fedcigar/graph.hpp"
#include "fedcigar/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fedcigar {

struct ClusterAssignment {
  std::vector<int> labels;  // one cluster id per client, in [0, k)
  int k = 1;

  std::size_t size() const { return labels.size(); }
  bool operator==(const ClusterAssignment&) const = default;
};

struct KMeansResult {
  ClusterAssignment assignment;
  Matrix centroids;
  std::vector<double> inertia;  // after each assignment step
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations (at most `max_iter`).
/// Ties go to the lowest centroid index; an emptied cluster takes the point
/// farthest from its current centroid.
KMeansResult kmeans_detailed(const Matrix& points, int k, std::uint64_t seed, int max_iter = 100);
ClusterAssignment kmeans(const Matrix& points, int k, std::uint64_t seed);

/// Adjusted Rand index from the contingency table. Returns 1 when the
/// denominator vanishes (both partitions all-singletons or single-cluster).
double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b);
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

enum class WindowPhase { Update, Silent };

struct ClusterWindow {
  std::vector<ClusterAssignment> window;
  WindowPhase phase = WindowPhase::Update;
  int silent_remaining = 0;
  std::optional<ClusterAssignment> pinned;
  std::size_t max_length = 5;  // L
  int silent_rounds = 10;      // P
  double theta = 0.5;
};

struct WindowStep {
  ClusterAssignment assignment;
  bool ran_kmeans = false;
  WindowPhase phase = WindowPhase::Update;  // phase the round was served in
  std::optional<double> stability;          // R_t, when computed
  bool reset = false;                       // window cleared because R_t < theta
  bool entered_silent = false;
};

/// Advances the window by one round.
///
/// Update phase: cluster the embeddings, compare against every stored
/// assignment (minimum ARI), reset the window when that drops below theta,
/// otherwise append. A full window pins its last assignment and switches to
/// P silent rounds, which reuse the pinned assignment without clustering.
WindowStep window_step(ClusterWindow& state, const Matrix& embeddings, int k, std::uint64_t seed);

/// Model per cluster id.
using ClusterModelBank = std::map<int, GlobalModelParams>;

/// Per cluster, the sample-count weighted mean of uploaded parameters.
/// Processing order is by client id, so message order does not matter.
ClusterModelBank aggregate(const std::vector<ClientRound>& rounds,
                           const ClusterAssignment& assignment);

/// Model each client starts the next round from, indexed by client id.
std::vector<GlobalModelParams> broadcast(const ClusterModelBank& bank,
                                         const ClusterAssignment& assignment);

const char* phase_name(WindowPhase phase);

}  // namespace fedcigar
