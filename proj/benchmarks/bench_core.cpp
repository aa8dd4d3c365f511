#include "fedcigar/gating.hpp"
#include "fedcigar/metrics.hpp"
#include "fedcigar/model.hpp"
#include "fedcigar/server.hpp"
#include "fedcigar/structure_encoding.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fedcigar;

namespace {

Graph ring_with_chords(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const int k = static_cast<int>(rng() % static_cast<unsigned>(n));
    g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    if (k != i) g.adjacency(i, k) = g.adjacency(k, i) = 1.0;
  }
  g.features = Matrix(n, 7);
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = gauss(rng);
  return g;
}

struct Setup {
  PreparedGraph graph;
  GlobalModelParams global;
  GatingParams gate;
};

Setup make_setup(int n) {
  Setup s;
  s.graph = prepare_graph(ring_with_chords(n, 1), {8, 16, false});
  ModelDims d;
  d.feature_dim = 7;
  d.structure_dim = 8 + 1 + 16;
  s.global = init_global_params(d, 2);
  s.gate = init_gating_params(7, d.structure_dim, true, 32, 2, 1.0, 3);
  return s;
}

}  // namespace

static void BM_GatedLossForward(benchmark::State& state) {
  Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(gated_loss(tape, s.graph, s.global, &s.gate, 0.5, 0.5).scalar());
  }
}
BENCHMARK(BM_GatedLossForward)->Arg(16)->Arg(32)->Arg(64);

static void BM_GatedLossBackward(benchmark::State& state) {
  Setup s = make_setup(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ad::Tape tape;
    tape.backward(gated_loss(tape, s.graph, s.global, &s.gate, 0.5, 0.5));
  }
}
BENCHMARK(BM_GatedLossBackward)->Arg(16)->Arg(32)->Arg(64);

static void BM_StructureEncoding(benchmark::State& state) {
  const Graph g = ring_with_chords(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(build_structure_encoding(g, 8, 16).matrix.data());
}
BENCHMARK(BM_StructureEncoding)->Arg(32)->Arg(128);

static void BM_KMeans(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Matrix pts(state.range(0), 96);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = gauss(rng);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(pts, 4, 7).labels.data());
}
BENCHMARK(BM_KMeans)->Arg(10)->Arg(100);

static void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit;
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  std::vector<bool> labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = unit(rng);
    labels[i] = i % 5 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);
BENCHMARK_MAIN();
