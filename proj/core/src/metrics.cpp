#include "fedcigar/metrics.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace fedcigar {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    throw EvaluationError("scores and labels differ in length (" + std::to_string(scores.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw EvaluationError("labels contain a single class; AUC and F1 are undefined");
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum keeps midranks integral.
  double rank_sum2 = 0.0;
  double pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid2 = static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        rank_sum2 += mid2;
        pos += 1.0;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  const double u2 = rank_sum2 - pos * (pos + 1.0);
  return u2 / (2.0 * pos * neg);
}

F1Result f1_at_contamination(const std::vector<double>& scores, const std::vector<bool>& labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::size_t tp = 0;
  for (std::size_t i = 0; i < k; ++i) tp += labels[order[i]] ? 1 : 0;
  const std::size_t fp = k - tp;
  const std::size_t fn = k - tp;
  F1Result out;
  out.flagged = k;
  out.threshold = scores[order[k - 1]];
  const double denom = static_cast<double>(2 * tp + fp + fn);
  out.f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  return out;
}

ClientMetrics evaluate_client(int client_id, const std::vector<double>& scores,
                              const std::vector<bool>& labels) {
  const F1Result f = f1_at_contamination(scores, labels);
  return {client_id, auc(scores, labels), f.f1, f.threshold};
}

EvalReport macro_average(std::vector<ClientMetrics> per_client) {
  if (per_client.empty()) throw EvaluationError("macro_average: no clients");
  EvalReport report;
  for (const auto& c : per_client) {
    report.macro_auc += c.auc;
    report.macro_f1 += c.f1;
  }
  const double n = static_cast<double>(per_client.size());
  report.macro_auc /= n;
  report.macro_f1 /= n;
  report.per_client = std::move(per_client);
  return report;
}

void write_eval_report(std::ostream& os, const EvalReport& report) {
  char buf[160];
  os << "kind\tclient\tauc\tf1\tthreshold\n";
  for (const auto& c : report.per_client) {
    std::snprintf(buf, sizeof buf, "client\t%d\t%.6f\t%.6f\t%.17g\n", c.client_id, c.auc, c.f1,
                  c.threshold);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "macro\t-\t%.6f\t%.6f\t-\n", report.macro_auc, report.macro_f1);
  os << buf;
}

}  // namespace fedcigar
