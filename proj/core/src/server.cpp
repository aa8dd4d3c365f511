#include "fedcigar/server.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace fedcigar {

namespace {

std::vector<int> nearest(const Matrix& points, const Matrix& centroids, std::vector<double>& dist) {
  const Eigen::Index n = points.rows();
  std::vector<int> labels(static_cast<std::size_t>(n));
  dist.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {  // strict: ties keep the lower index
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best_c;
    dist[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

Matrix kmeans_plus_plus(const Matrix& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centroids.row(0) = points.row(pick);
  chosen[static_cast<std::size_t>(pick)] = true;

  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, (points.row(i) - centroids.row(c - 1)).squaredNorm());
      total += d;
    }
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double run = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        run += d2[static_cast<std::size_t>(i)];
        if (run > target && d2[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // Every remaining point coincides with a centroid.
      pick = 0;
      while (pick < n && chosen[static_cast<std::size_t>(pick)]) ++pick;
      if (pick == n) pick = 0;
    }
    centroids.row(c) = points.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans_detailed(const Matrix& points, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw ConfigError("k-means: K must be at least 1");
  if (k > n)
    throw ConfigError("k-means: K = " + std::to_string(k) + " exceeds the number of clients " +
                      std::to_string(n));
  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.assignment.k = k;
  result.centroids = kmeans_plus_plus(points, k, rng);

  std::vector<int> previous;
  std::vector<double> dist;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> labels = nearest(points, result.centroids, dist);

    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (sizes[static_cast<std::size_t>(labels[si])] < 2) continue;
        if (far < 0 || dist[si] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      if (far < 0) break;
      const auto sf = static_cast<std::size_t>(far);
      --sizes[static_cast<std::size_t>(labels[sf])];
      labels[sf] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      dist[sf] = 0.0;
      result.centroids.row(c) = points.row(far);
    }

    double inertia = 0.0;
    for (double d : dist) inertia += d;
    result.inertia.push_back(inertia);
    result.iterations = it + 1;

    const bool converged = labels == previous;
    previous = std::move(labels);
    if (converged) break;

    Matrix sums = Matrix::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(previous[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) result.centroids.row(c) = sums.row(c) / sizes[static_cast<std::size_t>(c)];
  }
  result.assignment.labels = std::move(previous);
  return result;
}

ClusterAssignment kmeans(const Matrix& points, int k, std::uint64_t seed) {
  return kmeans_detailed(points, k, seed).assignment;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw DimensionError("ARI: partitions cover " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " items");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, m] : table) index += pairs(m);
  double sum_a = 0.0;
  for (const auto& [key, m] : rows) sum_a += pairs(m);
  double sum_b = 0.0;
  for (const auto& [key, m] : cols) sum_b += pairs(m);
  const double total = pairs(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
  return adjusted_rand_index(a.labels, b.labels);
}

WindowStep window_step(ClusterWindow& state, const Matrix& embeddings, int k, std::uint64_t seed) {
  WindowStep step;
  if (state.phase == WindowPhase::Silent) {
    step.assignment = *state.pinned;
    step.phase = WindowPhase::Silent;
    if (--state.silent_remaining <= 0) {
      state.phase = WindowPhase::Update;
      state.silent_remaining = 0;
    }
    return step;
  }

  step.phase = WindowPhase::Update;
  step.ran_kmeans = true;
  step.assignment = kmeans(embeddings, k, seed);
  if (state.window.empty()) {
    state.window.push_back(step.assignment);
  } else {
    double r = 1.0;
    for (const auto& past : state.window) r = std::min(r, adjusted_rand_index(step.assignment, past));
    step.stability = r;
    if (r < state.theta) {
      state.window.assign(1, step.assignment);
      step.reset = true;
    } else {
      state.window.push_back(step.assignment);
    }
  }
  if (state.window.size() >= state.max_length) {
    state.pinned = state.window.back();
    state.window.clear();
    if (state.silent_rounds > 0) {
      state.phase = WindowPhase::Silent;
      state.silent_remaining = state.silent_rounds;
      step.entered_silent = true;
    }
  }
  return step;
}

ClusterModelBank aggregate(const std::vector<ClientRound>& rounds,
                           const ClusterAssignment& assignment) {
  const std::size_t c = assignment.size();
  if (rounds.size() != c)
    throw ConfigError("aggregate: " + std::to_string(rounds.size()) + " uploads for " +
                      std::to_string(c) + " assigned clients");
  std::vector<const ClientRound*> by_id(c, nullptr);
  for (const auto& r : rounds) {
    if (r.client_id < 0 || static_cast<std::size_t>(r.client_id) >= c || by_id[static_cast<std::size_t>(r.client_id)])
      throw ConfigError("aggregate: client id " + std::to_string(r.client_id) +
                        " is unknown or duplicated");
    by_id[static_cast<std::size_t>(r.client_id)] = &r;
  }

  std::map<int, std::vector<const ClientRound*>> members;
  for (std::size_t id = 0; id < c; ++id) members[assignment.labels[id]].push_back(by_id[id]);

  ClusterModelBank bank;
  for (const auto& [cluster, group] : members) {
    if (group.size() == 1) {
      bank.emplace(cluster, group.front()->params);
      continue;
    }
    double total = 0.0;
    for (const auto* r : group) total += static_cast<double>(r->sample_count);
    GlobalModelParams merged = group.front()->params;
    auto out = merged.tensors();
    for (auto* t : out) t->value.setZero();
    for (const auto* r : group) {
      if (!(r->params.dims == merged.dims))
        throw DimensionError("aggregate: clients in one cluster disagree on model dims");
      const double w = total > 0.0 ? static_cast<double>(r->sample_count) / total
                                   : 1.0 / static_cast<double>(group.size());
      const auto in = r->params.tensors();
      for (std::size_t i = 0; i < out.size(); ++i) out[i]->value += w * in[i]->value;
    }
    bank.emplace(cluster, std::move(merged));
  }
  return bank;
}

std::vector<GlobalModelParams> broadcast(const ClusterModelBank& bank,
                                         const ClusterAssignment& assignment) {
  std::vector<GlobalModelParams> out;
  out.reserve(assignment.size());
  for (int label : assignment.labels) {
    const auto it = bank.find(label);
    if (it == bank.end()) throw ConfigError("broadcast: no model for cluster " + std::to_string(label));
    out.push_back(it->second);
  }
  return out;
}

const char* phase_name(WindowPhase phase) {
  return phase == WindowPhase::Update ? "update" : "silent";
}

}  // namespace fedcigar
