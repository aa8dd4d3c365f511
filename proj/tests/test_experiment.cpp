#include "fedcigar/config.hpp"
#include "fedcigar/error.hpp"
#include "fedcigar/experiment.hpp"
#include "fedcigar/structure_encoding.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace fedcigar;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig small_config() {
  return parse_config(
      "scenario = multi\n"
      "dataset.0 = synth:er(8..10,0.3):normal(3)*20 / cycle(8..10):normal(3)*4\n"
      "dataset.1 = synth:er(8..10,0.3):normal(3)*20 / cycle(8..10):normal(3)*4\n"
      "dataset.2 = synth:cycle(8..10):normal(3)*20 / er(8..10,0.3):normal(3)*4\n"
      "rounds = 3\n"
      "hidden = 8\n"
      "latent = 4\n"
      "k_rw = 4\n"
      "gate_hidden = 4\n"
      "seed = 5\n");
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config("dataset = tu:data:MUTAG  # comment\nalpha = 0.3\n\n# whole line\n");
  EXPECT_EQ(c.alpha, 0.3);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.num_clients, 3);
  EXPECT_EQ(c.cluster_count(), 3);
  EXPECT_EQ(c.window, 5);
  EXPECT_EQ(c.silent, 10);
  EXPECT_EQ(c.theta, 0.5);
  EXPECT_EQ(c.k_rw, 16);
  EXPECT_EQ(c.datasets.front(), "tu:data:MUTAG");
  std::ostringstream os;
  write_config(os, c);
  EXPECT_NE(os.str().find("alpha = 0.29999999999999999"), std::string::npos);
  EXPECT_NE(os.str().find("d_cap = auto"), std::string::npos);
}

TEST(Config, RoundTripsThroughText) {
  auto c = small_config();
  std::ostringstream os;
  write_config(os, c);
  const auto back = parse_config(os.str());
  std::ostringstream again;
  write_config(again, back);
  EXPECT_EQ(os.str(), again.str());
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("dataset = x\nalpha = 1.5\n"), FormatError);
  EXPECT_THROW(parse_config("dataset = x\nbogus = 1\n"), FormatError);
  EXPECT_THROW(parse_config("dataset = x\nseed = 1\nseed = 2\n"), FormatError);
  EXPECT_THROW(parse_config("alpha = 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("dataset = x\nnum_clients = 2\nclusters = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("dataset = x\ntheta = 2\n"), FormatError);
  EXPECT_THROW(parse_config("dataset = x\nablation = most\n"), FormatError);
  try {
    parse_config("dataset = x\n\nlr = fast\n", "cfg");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, LoadUsesFileStem) {
  const auto dir = testutil::scratch_dir("cfg");
  std::ofstream(dir / "my_run.cfg") << "dataset = synth:cycle(5)*10 / clique(5)*2\n";
  const auto c = load_config(dir / "my_run.cfg");
  EXPECT_EQ(c.name, "my_run");
  EXPECT_EQ(c.base_dir, dir);
  EXPECT_THROW(load_config(dir / "missing.cfg"), IoError);
}

TEST(Experiment, SingleClientIsCentralized) {
  auto c = parse_config(
      "dataset = synth:cycle(8..10):normal(3)*20 / clique(8..10):normal(3)*5\n"
      "num_clients = 1\nrounds = 2\nhidden = 8\nlatent = 4\nk_rw = 4\n");
  const auto r = run_experiment(c);
  ASSERT_EQ(r.report.per_client.size(), 1u);
  EXPECT_EQ(r.report.macro_auc, r.report.per_client[0].auc);
  EXPECT_EQ(r.report.macro_f1, r.report.per_client[0].f1);
  EXPECT_EQ(r.scores.size(), 9u);  // 4 held-out normals plus every anomaly
  for (const auto& rec : r.rounds) EXPECT_EQ(rec.assignment.k, 1);
}

TEST(Experiment, DeterministicArtifacts) {
  const auto c = small_config();
  const auto dir = testutil::scratch_dir("det");
  write_artifacts(run_experiment(c), dir / "a");
  write_artifacts(run_experiment(c), dir / "b");
  for (const char* f : {"scores.tsv", "round_log.jsonl", "report.txt", "loss_curve.tsv", "score_hist.tsv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_EQ(count_lines(slurp(dir / "a" / "loss_curve.tsv")), 1u + 3u);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "checkpoints" / "gate_client_2.fcgl"));
}

TEST(Experiment, NoClusterMatchesPlainFedAvg) {
  auto c = small_config();
  c.ablation = Ablation::NoCluster;
  const auto result = run_experiment(c);
  for (const auto& rec : result.rounds) EXPECT_FALSE(rec.ran_kmeans);

  // Reference loop: every client trains from the shared model, then the
  // sample-weighted average becomes the next shared model.
  const auto data = build_federated_dataset(c);
  std::vector<PreparedClient> clients;
  std::vector<Graph> all;
  for (const auto& cl : data.clients) all.insert(all.end(), cl.train_normal.begin(), cl.train_normal.end());
  const int d_cap = max_degree(all);
  for (const auto& cl : data.clients) clients.push_back(prepare_client(cl, {d_cap, c.k_rw, false}));
  ModelDims dims{3, d_cap + 1 + c.k_rw, c.hidden, c.latent, c.layers};
  GlobalModelParams shared = init_global_params(dims, global_init_seed(c.seed));
  std::vector<GatingParams> gates;
  for (int k = 0; k < 3; ++k)
    gates.push_back(init_gating_params(3, dims.structure_dim, true, c.gate_hidden, c.gate_layers, c.tau,
                                       gating_init_seed(c.seed, k)));
  for (int t = 1; t <= c.rounds; ++t) {
    std::vector<GlobalModelParams> local(3, shared);
    double total = 0;
    for (int k = 0; k < 3; ++k) {
      TrainOptions o{c.local_epochs, c.lr, c.batch, c.alpha, c.beta, client_train_seed(c.seed, t, k)};
      local_train(clients[static_cast<std::size_t>(k)].train, local[static_cast<std::size_t>(k)], &gates[static_cast<std::size_t>(k)], o);
      total += static_cast<double>(clients[static_cast<std::size_t>(k)].train.size());
    }
    for (std::size_t i = 0; i < shared.tensors().size(); ++i) {
      shared.tensors()[i]->value.setZero();
      for (int k = 0; k < 3; ++k)
        shared.tensors()[i]->value += (static_cast<double>(clients[static_cast<std::size_t>(k)].train.size()) / total) *
                                      local[static_cast<std::size_t>(k)].tensors()[i]->value;
    }
  }
  const auto& got = result.bank.at(0);
  for (std::size_t i = 0; i < shared.tensors().size(); ++i)
    EXPECT_LT((got.tensors()[i]->value - shared.tensors()[i]->value).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Experiment, NoGateHasNoGates) {
  auto c = small_config();
  c.ablation = Ablation::NoGate;
  EXPECT_TRUE(run_experiment(c).gates.empty());
}

TEST(Experiment, ZeroRoundsGiveHeaderOnlyCurve) {
  const auto dir = testutil::scratch_dir("plots");
  emit_plots({}, {}, dir);
  EXPECT_EQ(count_lines(slurp(dir / "loss_curve.tsv")), 1u);
  EXPECT_EQ(count_lines(slurp(dir / "score_hist.tsv")), 1u);
}

TEST(Experiment, SweepTableRows) {
  auto c = small_config();
  c.rounds = 1;
  const auto dir = testutil::scratch_dir("sweep");
  std::vector<std::string> values;
  for (int i = 1; i <= 9; ++i) values.push_back("0." + std::to_string(i));
  const auto rows = run_sweep(c, "alpha", values, dir);
  EXPECT_EQ(rows.size(), 9u);
  EXPECT_EQ(count_lines(slurp(dir / "sweep_alpha.tsv")), 10u);
  EXPECT_THROW(run_sweep(c, "nonsense", {"1"}, dir), ConfigError);
}

TEST(Experiment, ErrorsCarryContext) {
  auto c = small_config();
  c.datasets[0] = "tu:/nonexistent:NOPE";
  EXPECT_THROW(run_experiment(c), Error);
  c = small_config();
  c.clusters = 4;
  EXPECT_THROW(run_experiment(c), ConfigError);
}
