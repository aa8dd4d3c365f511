#include "fedcigar/model.hpp"

#include "fedcigar/error.hpp"
#include "fedcigar/random.hpp"
#include "fedcigar/structure_encoding.hpp"

#include <cmath>
#include <random>

namespace fedcigar {

namespace {

Matrix xavier_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

void check_dims(const ModelDims& d) {
  if (d.feature_dim < 1 || d.structure_dim < 1 || d.hidden < 1 || d.latent < 1 || d.layers < 1)
    throw ConfigError("model dimensions must be positive");
}

}  // namespace

std::vector<ad::Tensor> init_gcn_stack(const std::string& prefix, int in, int hidden, int out,
                                       int layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ad::Tensor> stack;
  for (int l = 0; l < layers; ++l) {
    const int fan_in = l == 0 ? in : hidden;
    const int fan_out = l + 1 == layers ? out : hidden;
    stack.emplace_back(prefix + "." + std::to_string(l), xavier_uniform(fan_in, fan_out, rng));
  }
  return stack;
}

GlobalModelParams init_global_params(const ModelDims& dims, std::uint64_t seed) {
  check_dims(dims);
  GlobalModelParams p;
  p.dims = dims;
  // Each block draws from its own stream so resizing one does not shift the others.
  const std::uint64_t seeds[] = {derive_seed(seed, {1}), derive_seed(seed, {2}),
                                 derive_seed(seed, {3}), derive_seed(seed, {4})};

  p.enc_f = init_gcn_stack("enc_f", dims.feature_dim, dims.hidden, dims.hidden, dims.layers, seeds[0]);
  p.enc_s = init_gcn_stack("enc_s", dims.structure_dim, dims.hidden, dims.hidden, dims.layers, seeds[1]);
  std::mt19937_64 rng(seeds[2]);
  p.fusion.emplace_back("fusion.w1", xavier_uniform(2 * dims.hidden, dims.hidden, rng));
  p.fusion.emplace_back("fusion.b1", Matrix::Zero(1, dims.hidden));
  p.fusion.emplace_back("fusion.w2", xavier_uniform(dims.hidden, dims.latent, rng));
  p.fusion.emplace_back("fusion.b2", Matrix::Zero(1, dims.latent));
  p.dec_f = init_gcn_stack("dec_f", dims.latent, dims.hidden, dims.feature_dim, dims.layers, seeds[3]);
  return p;
}

std::vector<ad::Tensor*> GlobalModelParams::tensors() {
  std::vector<ad::Tensor*> out;
  for (auto* block : {&enc_f, &enc_s, &fusion, &dec_f})
    for (auto& t : *block) out.push_back(&t);
  return out;
}

std::vector<const ad::Tensor*> GlobalModelParams::tensors() const {
  std::vector<const ad::Tensor*> out;
  for (const auto* block : {&enc_f, &enc_s, &fusion, &dec_f})
    for (const auto& t : *block) out.push_back(&t);
  return out;
}

std::size_t GlobalModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->value.size());
  return n;
}

Matrix gcn_propagation(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  Matrix with_loops = adjacency + Matrix::Identity(n, n);
  const Vector inv_sqrt = with_loops.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * with_loops * inv_sqrt.asDiagonal();
}

PreparedGraph prepare_graph(const Graph& graph, const EncodingOptions& options) {
  PreparedGraph out;
  out.adjacency = graph.adjacency;
  out.features = graph.features;
  out.structure = build_structure_encoding(graph, options.d_cap, options.k_rw).matrix;
  if (options.zero_structure) out.structure.setZero();
  out.propagation = gcn_propagation(graph.adjacency);
  out.is_anomaly = graph.is_anomaly;
  return out;
}

ad::Var gcn_layer(const ad::Var& h, const ad::Var& propagation, const ad::Var& weight,
                  bool activate) {
  if (h.cols() != weight.rows())
    throw DimensionError("gcn_layer: input width " + std::to_string(h.cols()) +
                         " does not match weight rows " + std::to_string(weight.rows()));
  if (propagation.rows() != h.rows() || propagation.cols() != h.rows())
    throw DimensionError("gcn_layer: propagation matrix does not match node count");
  ad::Var out = ad::matmul(propagation, ad::matmul(h, weight));
  return activate ? ad::relu(out) : out;
}

ad::Var gcn_stack(ad::Tape& tape, const ad::Var& input, const ad::Var& propagation,
                  std::vector<ad::Tensor>& layers) {
  ad::Var h = input;
  for (std::size_t l = 0; l < layers.size(); ++l)
    h = gcn_layer(h, propagation, tape.parameter(layers[l]), l + 1 < layers.size());
  return h;
}

Encoded encode(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& params) {
  const auto& d = params.dims;
  if (graph.features.cols() != d.feature_dim)
    throw DimensionError("encode: feature width " + std::to_string(graph.features.cols()) +
                         " != model feature_dim " + std::to_string(d.feature_dim));
  if (graph.structure.cols() != d.structure_dim)
    throw DimensionError("encode: structure width " + std::to_string(graph.structure.cols()) +
                         " != model structure_dim " + std::to_string(d.structure_dim));
  const ad::Var prop = tape.constant(graph.propagation);
  return {gcn_stack(tape, tape.constant(graph.features), prop, params.enc_f),
          gcn_stack(tape, tape.constant(graph.structure), prop, params.enc_s)};
}

ad::Var fuse(ad::Tape& tape, const Encoded& encoded, GlobalModelParams& params) {
  const ad::Var joint = ad::concat_cols(encoded.h_f, encoded.h_s);
  const ad::Var hidden = ad::relu(ad::add(ad::matmul(joint, tape.parameter(params.fusion[0])),
                                          tape.parameter(params.fusion[1])));
  return ad::add(ad::matmul(hidden, tape.parameter(params.fusion[2])),
                 tape.parameter(params.fusion[3]));
}

ReconOutput fuse_and_decode(ad::Tape& tape, const Encoded& encoded, const PreparedGraph& graph,
                            GlobalModelParams& params) {
  ReconOutput out;
  out.z = fuse(tape, encoded, params);
  out.x_hat = gcn_stack(tape, out.z, tape.constant(graph.propagation), params.dec_f);
  out.a_hat = ad::sigmoid(ad::matmul(out.z, ad::transpose(out.z)));
  out.l_x = feature_error(out.x_hat, tape.constant(graph.features));
  out.l_a = adjacency_error(out.a_hat, tape.constant(graph.adjacency));
  return out;
}

ReconOutput reconstruct(ad::Tape& tape, const PreparedGraph& graph, GlobalModelParams& params) {
  return fuse_and_decode(tape, encode(tape, graph, params), graph, params);
}

ad::Var feature_error(const ad::Var& x_hat, const ad::Var& x) {
  if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols())
    throw DimensionError("feature_error: reconstruction and target shapes differ");
  const ad::Var cos =
      ad::row_sum(ad::mul(ad::row_l2_normalize(x, kZeroRowNorm), ad::row_l2_normalize(x_hat, kZeroRowNorm)));
  return ad::clamp(ad::add_scalar(ad::scale(cos, -1.0), 1.0), 0.0, 2.0);
}

ad::Var adjacency_error(const ad::Var& a_hat, const ad::Var& adjacency) {
  const ad::Var p = ad::clamp(a_hat, kProbClamp, 1.0 - kProbClamp);
  const ad::Var log_p = ad::log(p);
  const ad::Var log_q = ad::log(ad::add_scalar(ad::scale(p, -1.0), 1.0));
  const ad::Var not_edge = ad::add_scalar(ad::scale(adjacency, -1.0), 1.0);
  return ad::scale(ad::add(ad::mul(log_p, adjacency), ad::mul(log_q, not_edge)), -1.0);
}

ad::Var loss_and_score(const ReconOutput& recon, const std::optional<ad::Var>& weights,
                       double alpha, double beta) {
  ad::Var lx = recon.l_x;
  ad::Var la = recon.l_a;
  if (weights) {
    const ad::Var& w = *weights;
    if (w.rows() != lx.rows() || w.cols() != 1)
      throw DimensionError("loss_and_score: node weights must be n x 1");
    lx = ad::mul(lx, w);
    la = ad::mul(la, ad::matmul(w, ad::transpose(w)));
  }
  const ad::Var feature_term = ad::add(ad::mean(lx), ad::scale(ad::std_dev(lx, kStdEpsilon), beta));
  const ad::Var structure_term =
      ad::add(ad::mean(la), ad::scale(ad::std_dev(la, kStdEpsilon), beta));
  return ad::add(ad::scale(feature_term, alpha), ad::scale(structure_term, 1.0 - alpha));
}

Vector readout(const Matrix& z) { return z.colwise().mean().transpose(); }

}  // namespace fedcigar
