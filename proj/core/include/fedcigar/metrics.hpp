#pragma once

// Graph-level anomaly detection metrics. Anomalies are the positive class and
// a larger score means more anomalous.

#include <ostream>
#include <vector>

namespace fedcigar {

/// Mann-Whitney AUC with midranks for ties.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;  // score of the lowest flagged item
  std::size_t flagged = 0;
};

/// Flags the k highest scores, k = number of anomalies in `labels`. Equal
/// scores keep input order.
F1Result f1_at_contamination(const std::vector<double>& scores, const std::vector<bool>& labels);

struct ClientMetrics {
  int client_id = 0;
  double auc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
};

struct EvalReport {
  std::vector<ClientMetrics> per_client;
  double macro_auc = 0.0;
  double macro_f1 = 0.0;
};

ClientMetrics evaluate_client(int client_id, const std::vector<double>& scores,
                              const std::vector<bool>& labels);

/// Unweighted mean over clients.
EvalReport macro_average(std::vector<ClientMetrics> per_client);

/// One `client` line per entry followed by a `macro` line, tab separated.
void write_eval_report(std::ostream& os, const EvalReport& report);

}  // namespace fedcigar
