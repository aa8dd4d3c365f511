#include "fedcigar/error.hpp"
#include "fedcigar/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fedcigar;

namespace {

double auc_by_pairs(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return wins / pairs;
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_EQ(auc({0.9, 0.1}, {true, false}), 1.0);
  EXPECT_EQ(auc({2, 2, 2, 2}, {true, false, true, false}), 0.5);
  EXPECT_EQ(auc({3, 2, 1, 0}, {true, false, true, false}), 0.75);
  EXPECT_THROW(auc({1, 2}, {true, true}), EvaluationError);
  EXPECT_THROW(auc({1, 2}, {true}), EvaluationError);
}

TEST(Auc, MatchesPairwiseOracleExactly) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(2, 40), level(0, 6);
  std::bernoulli_distribution coin(0.4);
  int checked = 0;
  while (checked < 500) {
    const int n = len(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<bool> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[static_cast<std::size_t>(i)] = level(rng) * 0.25;  // plenty of ties
      y[static_cast<std::size_t>(i)] = coin(rng);
    }
    const auto pos = std::count(y.begin(), y.end(), true);
    if (pos == 0 || pos == n) continue;
    EXPECT_EQ(auc(s, y), auc_by_pairs(s, y));
    ++checked;
  }
}

TEST(Auc, MonotoneInvarianceAndComplement) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30), t(30), neg(30);
    std::vector<bool> y(30);
    for (int i = 0; i < 30; ++i) {
      s[static_cast<std::size_t>(i)] = g(rng);
      t[static_cast<std::size_t>(i)] = std::exp(3.0 * s[static_cast<std::size_t>(i)]) + 1.0;
      neg[static_cast<std::size_t>(i)] = -s[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(i)] = i % 3 == 0;
    }
    EXPECT_EQ(auc(s, y), auc(t, y));
    EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-15);
  }
}

TEST(F1, Examples) {
  EXPECT_EQ(f1_at_contamination({0.9, 0.8, 0.1, 0.2}, {true, true, false, false}).f1, 1.0);
  EXPECT_EQ(f1_at_contamination({0.1, 0.2, 0.9, 0.8}, {true, true, false, false}).f1, 0.0);
  const auto r = f1_at_contamination({4, 3, 2, 1}, {true, false, true, false});
  EXPECT_EQ(r.f1, 0.5);
  EXPECT_EQ(r.threshold, 3.0);
  EXPECT_EQ(r.flagged, 2u);
}

TEST(F1, TiesKeepInputOrder) {
  // All tied: the first k items in input order are flagged.
  EXPECT_EQ(f1_at_contamination({1, 1, 1, 1}, {true, false, false, false}).f1, 1.0);
  EXPECT_EQ(f1_at_contamination({1, 1, 1, 1}, {false, true, false, false}).f1, 0.0);
}

TEST(Macro, Averages) {
  const auto one = macro_average({{0, 0.8, 0.6, 0.0}});
  EXPECT_EQ(one.macro_auc, 0.8);
  EXPECT_EQ(one.macro_f1, 0.6);
  EXPECT_NEAR(macro_average({{0, 0.8, 0, 0}, {1, 1.0, 0, 0}}).macro_auc, 0.9, 1e-15);
  EXPECT_NEAR(macro_average({{0, 0.7, 0, 0}, {1, 0.8, 0, 0}, {2, 0.9, 0, 0}}).macro_auc, 0.8, 1e-15);
  EXPECT_THROW(macro_average({}), EvaluationError);
}

TEST(Macro, ReportText) {
  std::ostringstream os;
  write_eval_report(os, macro_average({{0, 0.75, 0.5, 3.0}, {1, 1.0, 1.0, 2.0}}));
  const std::string text = os.str();
  EXPECT_NE(text.find("client\t0\t0.750000\t0.500000\t3"), std::string::npos);
  EXPECT_NE(text.find("macro\t-\t0.875000\t0.750000"), std::string::npos);
}
