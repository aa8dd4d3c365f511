#include "fedcigar/client.hpp"

#include "fedcigar/checkpoint.hpp"
#include "fedcigar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fedcigar {

PreparedClient prepare_client(const ClientDataset& dataset, const EncodingOptions& options) {
  PreparedClient out;
  out.client_id = dataset.client_id;
  out.train.reserve(dataset.train_normal.size());
  for (const auto& g : dataset.train_normal) out.train.push_back(prepare_graph(g, options));
  out.test.reserve(dataset.test.size());
  for (const auto& g : dataset.test) out.test.push_back(prepare_graph(g, options));
  return out;
}

namespace {

std::vector<ad::Tensor*> trainable(GlobalModelParams& global, GatingParams* gating) {
  auto params = global.tensors();
  if (gating != nullptr)
    for (auto* t : gating->tensors()) params.push_back(t);
  return params;
}

}  // namespace

TrainTrace local_train(std::span<const PreparedGraph> train, GlobalModelParams& global,
                       GatingParams* gating, const TrainOptions& options) {
  if (options.epochs < 1) throw ConfigError("local_train: epochs must be at least 1");
  if (options.batch < 1) throw ConfigError("local_train: batch must be at least 1");
  if (train.empty()) throw ConfigError("local_train: no training graphs");

  const auto params = trainable(global, gating);
  for (auto* t : params) t->zero_grad();
  ad::AdamState adam;
  const ad::AdamOptions adam_options{options.lr};

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> graph_loss(train.size());

  TrainTrace trace;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        ad::Tape tape;
        const ad::Var loss = gated_loss(tape, train[idx], global, gating, options.alpha, options.beta);
        const double value = loss.scalar();
        if (!std::isfinite(value))
          throw TrainingError("non-finite loss on training graph " + std::to_string(idx) +
                              " in epoch " + std::to_string(epoch));
        graph_loss[idx] = value;
        tape.backward(ad::scale(loss, inv_batch));
      }
      ad::adam_step(params, adam, adam_options);
    }
    // Summed in index order so the trace does not depend on the shuffle.
    trace.epoch_loss.push_back(std::accumulate(graph_loss.begin(), graph_loss.end(), 0.0) /
                               static_cast<double>(graph_loss.size()));
  }
  return trace;
}

double mean_loss(std::span<const PreparedGraph> graphs, const GlobalModelParams& global,
                 const GatingParams* gating, double alpha, double beta) {
  if (graphs.empty()) throw ConfigError("mean_loss: no graphs");
  double total = 0.0;
  for (const auto& s : score_test_set(graphs, global, gating, alpha, beta)) total += s.score;
  return total / static_cast<double>(graphs.size());
}

Matrix graph_representations(std::span<const PreparedGraph> graphs,
                             const GlobalModelParams& global) {
  GlobalModelParams frozen = global;
  for (auto* t : frozen.tensors()) t->requires_grad = false;
  Matrix reps(static_cast<Eigen::Index>(graphs.size()), global.dims.latent);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    ad::Tape tape;
    const ad::Var z = fuse(tape, encode(tape, graphs[i], frozen), frozen);
    reps.row(static_cast<Eigen::Index>(i)) = readout(z.value()).transpose();
  }
  return reps;
}

Vector client_embedding(std::span<const PreparedGraph> train, const GlobalModelParams& global) {
  if (train.empty()) throw ConfigError("client_embedding: no training graphs");
  const Matrix reps = graph_representations(train, global);
  const Eigen::Index d = reps.cols();
  Vector e(3 * d);
  e.segment(0, d) = reps.colwise().mean().transpose();
  e.segment(d, d) = reps.colwise().maxCoeff().transpose();
  e.segment(2 * d, d) = reps.colwise().minCoeff().transpose();
  return e;
}

std::vector<ScoredGraph> score_test_set(std::span<const PreparedGraph> test,
                                        const GlobalModelParams& global, const GatingParams* gating,
                                        double alpha, double beta) {
  GlobalModelParams frozen = global;
  for (auto* t : frozen.tensors()) t->requires_grad = false;
  std::optional<GatingParams> frozen_gate;
  if (gating != nullptr) {
    frozen_gate = *gating;
    for (auto* t : frozen_gate->tensors()) t->requires_grad = false;
  }
  std::vector<ScoredGraph> out;
  out.reserve(test.size());
  for (const auto& g : test) {
    ad::Tape tape;
    const ad::Var s =
        gated_loss(tape, g, frozen, frozen_gate ? &*frozen_gate : nullptr, alpha, beta);
    out.push_back({s.scalar(), g.is_anomaly});
  }
  return out;
}

Bytes serialize_client_round(const ClientRound& round) {
  static constexpr std::uint8_t magic[] = {'F', 'C', 'G', 'R'};
  ByteWriter w;
  w.raw(magic);
  w.u32(static_cast<std::uint32_t>(round.client_id));
  w.u64(round.sample_count);
  w.u32(static_cast<std::uint32_t>(round.params.dims.latent));
  w.u32(static_cast<std::uint32_t>(round.embedding.size()));
  for (Eigen::Index i = 0; i < round.embedding.size(); ++i) w.f64(round.embedding(i));
  write_global_params(w, round.params);
  return w.take();
}

ClientRound deserialize_client_round(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("FCGR");
  ClientRound round;
  round.client_id = static_cast<int>(r.u32());
  round.sample_count = r.u64();
  const std::uint32_t latent = r.u32();
  const std::uint32_t len = r.u32();
  if (len != 3 * latent) throw FormatError("<client round>", r.position(), "embedding length is not 3 * latent");
  round.embedding.resize(len);
  for (std::uint32_t i = 0; i < len; ++i) round.embedding(i) = r.f64();
  round.params = read_global_params(r);
  if (round.params.dims.latent != static_cast<int>(latent))
    throw FormatError("<client round>", r.position(), "latent size disagrees with parameters");
  return round;
}

}  // namespace fedcigar
