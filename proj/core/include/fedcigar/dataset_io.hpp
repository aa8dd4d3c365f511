#pragma once

#include "fedcigar/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fedcigar {

/// Reads a TUDataset collection `<root>/<name>_A.txt`, `_graph_indicator.txt`,
/// `_graph_labels.txt` and the optional `_node_labels.txt` and
/// `_node_attributes.txt`. Node labels are one-hot encoded and placed before
/// raw attributes; datasets with neither get a single all-ones column.
std::vector<Graph> parse_tudataset(const std::filesystem::path& root, const std::string& name);

/// Writes graphs back in TUDataset layout. Features are written as node
/// attributes, so a parse of the result reproduces adjacency and features.
void write_tudataset(const std::vector<Graph>& graphs, const std::filesystem::path& root,
                     const std::string& name);

/// Flags graphs whose class label equals `anomaly_class`; when absent the
/// smallest label present is used.
std::vector<Graph> label_anomalies(std::vector<Graph> graphs,
                                   std::optional<int> anomaly_class = std::nullopt);

FederatedDataset partition_single(const std::vector<Graph>& graphs, std::size_t num_clients,
                                  double train_fraction, std::uint64_t seed);

using NamedDataset = std::pair<std::string, std::vector<Graph>>;

FederatedDataset partition_multi(const std::vector<NamedDataset>& datasets, double train_fraction,
                                 std::uint64_t seed);

enum class GeneratorKind { ErdosRenyi, Cycle, Clique, TwoCommunity };
enum class FeatureKind { Ones, StandardNormal };

/// Synthetic graph family. Node count is drawn uniformly from
/// [n_min, n_max] per graph.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Cycle;
  int n_min = 4;
  int n_max = 4;
  double p = 0.0;
  double p_in = 0.0;
  double p_out = 0.0;
  FeatureKind features = FeatureKind::Ones;
  int feature_dim = 1;
};

/// Parses `er(20,0.3)`, `cycle(4)`, `clique(5)`, `two_community(12,0.6,0.05)`.
/// The node count may be a range, e.g. `cycle(10..14)`.
GeneratorSpec parse_generator_spec(const std::string& text);

std::vector<Graph> generate_synthetic(const GeneratorSpec& spec, std::size_t count,
                                      std::uint64_t seed);

}  // namespace fedcigar
