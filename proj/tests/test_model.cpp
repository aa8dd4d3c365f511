#include "fedcigar/client.hpp"
#include "fedcigar/dataset_io.hpp"
#include "fedcigar/error.hpp"
#include "fedcigar/model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fedcigar;
using fedcigar::testutil::numeric_gradient;
using fedcigar::testutil::relative_error;

namespace {

ModelDims small_dims(int feature_dim, int structure_dim) {
  ModelDims d;
  d.feature_dim = feature_dim;
  d.structure_dim = structure_dim;
  d.hidden = 6;
  d.latent = 4;
  return d;
}

PreparedGraph prepared(const Graph& g) { return prepare_graph(g, {4, 3, false}); }

// D~^-1/2 (A + I) D~^-1/2 H W written out entry by entry.
Matrix dense_gcn(const Matrix& a, const Matrix& h, const Matrix& w) {
  const Eigen::Index n = a.rows();
  std::vector<double> deg(static_cast<std::size_t>(n), 1.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += a(i, j);
  Matrix hw = Matrix::Zero(n, w.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index k = 0; k < w.rows(); ++k) hw(i, c) += h(i, k) * w(k, c);
  Matrix out = Matrix::Zero(n, w.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double aij = a(i, j) + (i == j ? 1.0 : 0.0);
      if (aij == 0.0) continue;
      const double norm = aij / std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]);
      for (Eigen::Index c = 0; c < w.cols(); ++c) out(i, c) += norm * hw(j, c);
    }
  return out;
}

double score(const PreparedGraph& g, GlobalModelParams& params, double alpha = 0.5, double beta = 0.5) {
  ad::Tape tape;
  return loss_and_score(reconstruct(tape, g, params), std::nullopt, alpha, beta).scalar();
}

}  // namespace

TEST(GcnLayer, SingleIsolatedNodeIsRelu) {
  ad::Tape tape;
  Matrix x(1, 3);
  x << 1.0, -2.0, 0.5;
  const auto out = gcn_layer(tape.constant(x), tape.constant(gcn_propagation(Matrix::Zero(1, 1))),
                             tape.constant(Matrix::Identity(3, 3)), true);
  Matrix expected(1, 3);
  expected << 1.0, 0.0, 0.5;
  EXPECT_EQ(out.value(), expected);
}

TEST(GcnLayer, EdgeWithConstantRowsIsSymmetric) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  std::mt19937_64 rng(1);
  Matrix w = Matrix::Random(3, 4);
  ad::Tape tape;
  const auto out = gcn_layer(tape.constant(Matrix::Ones(2, 3)), tape.constant(gcn_propagation(a)),
                             tape.constant(w), false);
  EXPECT_EQ(out.value().row(0), out.value().row(1));
}

TEST(GcnLayer, MatchesDenseFormula) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = testutil::random_graph(5, 0.5, 3, rng);
    const Matrix w = testutil::random_graph(3, 0.0, 4, rng).features;
    ad::Tape tape;
    const auto out = gcn_layer(tape.constant(g.features), tape.constant(gcn_propagation(g.adjacency)),
                               tape.constant(w), false);
    EXPECT_LT((out.value() - dense_gcn(g.adjacency, g.features, w)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GcnLayer, ShapeMismatch) {
  ad::Tape tape;
  EXPECT_THROW(gcn_layer(tape.constant(Matrix::Ones(3, 2)), tape.constant(Matrix::Identity(3, 3)),
                         tape.constant(Matrix::Ones(4, 2)), true),
               DimensionError);
}

TEST(Encode, ZeroFeaturesGiveZeroChannel) {
  std::mt19937_64 rng(2);
  Graph g = testutil::random_graph(6, 0.4, 3, rng);
  g.features.setZero();
  const PreparedGraph p = prepared(g);
  auto params = init_global_params(small_dims(3, static_cast<int>(p.structure.cols())), 1);
  ad::Tape tape;
  const Encoded e = encode(tape, p, params);
  EXPECT_EQ(e.h_f.value(), Matrix::Zero(6, 6));
}

TEST(Encode, PermutationEquivariant) {
  std::mt19937_64 rng(3);
  const Graph g = testutil::random_graph(7, 0.4, 3, rng);
  const auto perm = testutil::random_permutation(7, rng);
  const PreparedGraph p = prepared(g);
  const PreparedGraph q = prepared(permute_graph(g, perm));
  auto params = init_global_params(small_dims(3, static_cast<int>(p.structure.cols())), 4);
  ad::Tape tape;
  const Encoded a = encode(tape, p, params);
  const Encoded b = encode(tape, q, params);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto s = static_cast<Eigen::Index>(perm[i]);
    EXPECT_LT((b.h_f.value().row(r) - a.h_f.value().row(s)).norm(), 1e-12);
    EXPECT_LT((b.h_s.value().row(r) - a.h_s.value().row(s)).norm(), 1e-12);
  }
}

TEST(Encode, ChannelsAreDistinct) {
  std::mt19937_64 rng(4);
  const Graph g = testutil::random_graph(5, 0.5, 3, rng);
  PreparedGraph p = prepare_graph(g, {4, 3, false});
  p.structure = p.features;  // equal widths so the inputs can be swapped
  auto params = init_global_params(small_dims(3, 3), 5);
  PreparedGraph swapped = p;
  swapped.features = testutil::random_graph(5, 0.5, 3, rng).features;
  swapped.structure = p.features;
  p.structure = swapped.features;
  ad::Tape tape;
  const Encoded a = encode(tape, p, params);
  const Encoded b = encode(tape, swapped, params);
  EXPECT_GT((a.h_f.value() - b.h_s.value()).norm(), 1e-6);
}

TEST(Encode, DimensionChecks) {
  std::mt19937_64 rng(4);
  const PreparedGraph p = prepared(testutil::random_graph(5, 0.5, 3, rng));
  auto params = init_global_params(small_dims(2, static_cast<int>(p.structure.cols())), 1);
  ad::Tape tape;
  EXPECT_THROW(encode(tape, p, params), DimensionError);
}

TEST(FeatureError, CosineExtremes) {
  ad::Tape tape;
  Matrix x(4, 2), xh(4, 2);
  x << 1, 2, 1, 0, 1, 0, 0, 0;
  xh << 2, 4, 0, 3, -1, 0, 1, 1;
  const Matrix l = feature_error(tape.constant(xh), tape.constant(x)).value();
  EXPECT_NEAR(l(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(l(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(l(2, 0), 2.0, 1e-15);
  EXPECT_EQ(l(3, 0), 1.0);  // zero row guard
}

TEST(AdjacencyError, MaximalUncertainty) {
  ad::Tape tape;
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  const Matrix l = adjacency_error(tape.constant(Matrix::Constant(3, 3, 0.5)), tape.constant(a)).value();
  for (Eigen::Index i = 0; i < l.size(); ++i) EXPECT_NEAR(l.data()[i], std::log(2.0), 1e-15);
}

TEST(AdjacencyError, MatchesScalarLoop) {
  std::mt19937_64 rng(6);
  const Graph g = testutil::random_graph(4, 0.5, 1, rng);
  const Matrix z = testutil::random_graph(4, 0.0, 3, rng).features;
  ad::Tape tape;
  const ad::Var zv = tape.constant(z);
  const ad::Var a_hat = ad::sigmoid(ad::matmul(zv, ad::transpose(zv)));
  const Matrix l = adjacency_error(a_hat, tape.constant(g.adjacency)).value();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double p = 1.0 / (1.0 + std::exp(-z.row(i).dot(z.row(j))));
      p = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
      const double y = g.adjacency(i, j);
      EXPECT_NEAR(l(i, j), -(y * std::log(p) + (1 - y) * std::log(1 - p)), 1e-12);
    }
}

TEST(LossAndScore, HandEvaluation) {
  ad::Tape tape;
  ReconOutput r;
  Matrix lx(2, 1);
  lx << 0.0, 1.0;
  r.l_x = tape.constant(lx);
  r.l_a = tape.constant(Matrix::Constant(2, 2, std::log(2.0)));
  const double expected = 0.5 * (0.5 + 0.5) + 0.5 * std::log(2.0);
  // sqrt(var + 1e-8) adds about 1e-8 / (2 * 0.5) to the feature std and 1e-4 to the constant one.
  EXPECT_NEAR(loss_and_score(r, std::nullopt, 0.5, 1.0).scalar(), expected, 1e-4);
  EXPECT_NEAR(loss_and_score(r, std::nullopt, 1.0, 0.0).scalar(), 0.5, 1e-15);
}

TEST(LossAndScore, UnitWeightsBitIdentical) {
  std::mt19937_64 rng(7);
  const PreparedGraph p = prepared(testutil::random_graph(6, 0.4, 3, rng));
  auto params = init_global_params(small_dims(3, static_cast<int>(p.structure.cols())), 2);
  ad::Tape tape;
  const ReconOutput r = reconstruct(tape, p, params);
  const double plain = loss_and_score(r, std::nullopt, 0.3, 0.7).scalar();
  const double weighted = loss_and_score(r, tape.constant(Matrix::Ones(6, 1)), 0.3, 0.7).scalar();
  EXPECT_EQ(plain, weighted);
}

TEST(ReconOutput, RangesHold) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const PreparedGraph p = prepared(testutil::random_graph(5 + trial, 0.3, 2, rng));
    auto params = init_global_params(small_dims(2, static_cast<int>(p.structure.cols())), trial);
    ad::Tape tape;
    const ReconOutput r = reconstruct(tape, p, params);
    EXPECT_GE(r.l_x.value().minCoeff(), 0.0);
    EXPECT_LE(r.l_x.value().maxCoeff(), 2.0);
    EXPECT_GT(r.a_hat.value().minCoeff(), 0.0);
    EXPECT_LT(r.a_hat.value().maxCoeff(), 1.0);
    EXPECT_GE(r.l_a.value().minCoeff(), 0.0);
  }
}

TEST(Score, PermutationInvariant) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = testutil::random_graph(8, 0.3, 3, rng);
    const PreparedGraph p = prepared(g);
    const PreparedGraph q = prepared(permute_graph(g, testutil::random_permutation(8, rng)));
    auto params = init_global_params(small_dims(3, static_cast<int>(p.structure.cols())), trial);
    EXPECT_NEAR(score(p, params), score(q, params), 1e-9);
  }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const PreparedGraph p = prepared(testutil::random_graph(6, 0.4, 3, rng));
  auto params = init_global_params(small_dims(3, static_cast<int>(p.structure.cols())), 3);
  for (auto* t : params.tensors()) t->zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss_and_score(reconstruct(tape, p, params), std::nullopt, 0.4, 0.6));
  }
  for (auto* t : params.tensors()) {
    const Matrix analytic = t->grad;
    const Matrix numeric = numeric_gradient(*t, [&] { return score(p, params, 0.4, 0.6); });
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << t->name;
  }
}

TEST(Params, CountIsFunctionOfDims) {
  const ModelDims d = small_dims(3, 9);
  const auto a = init_global_params(d, 1);
  const auto b = init_global_params(d, 2);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  // enc_f 3*6 + 6*6, enc_s 9*6 + 6*6, fusion 12*6 + 6 + 6*4 + 4, dec_f 4*6 + 6*3
  EXPECT_EQ(a.parameter_count(), 54u + 90u + 106u + 42u);
  EXPECT_NE(a.enc_f[0].value, b.enc_f[0].value);
}

TEST(Training, FixedBatchLossDecreases) {
  const auto graphs = generate_synthetic(parse_generator_spec("er(8..10,0.3):normal(3)"), 12, 5);
  std::vector<PreparedGraph> train;
  for (const auto& g : graphs) train.push_back(prepare_graph(g, {6, 4, false}));
  auto params = init_global_params(small_dims(3, 11), 1);
  TrainOptions opts;
  opts.epochs = 50;
  opts.batch = 12;
  opts.lr = 3e-3;
  const TrainTrace trace = local_train(train, params, nullptr, opts);
  int decreasing = 0;
  for (std::size_t e = 1; e < trace.epoch_loss.size(); ++e) decreasing += trace.epoch_loss[e] < trace.epoch_loss[e - 1];
  EXPECT_GE(decreasing, 45);
}
