#include "fedcigar/dataset_io.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

namespace fedcigar {

namespace fs = std::filesystem;

std::size_t Graph::num_edges() const {
  std::size_t count = 0;
  const Eigen::Index n = adjacency.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (adjacency(i, j) != 0.0) ++count;
  return count;
}

Vector Graph::degrees() const { return adjacency.rowwise().sum(); }

void validate_graph(const Graph& graph) {
  const Eigen::Index n = graph.adjacency.rows();
  if (n < 1) throw DimensionError("graph has no nodes");
  if (graph.adjacency.cols() != n)
    throw DimensionError("adjacency is " + std::to_string(n) + "x" +
                         std::to_string(graph.adjacency.cols()) + ", expected square");
  if (graph.features.rows() != n)
    throw DimensionError("features has " + std::to_string(graph.features.rows()) +
                         " rows for " + std::to_string(n) + " nodes");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (graph.adjacency(i, i) != 0.0) throw DimensionError("adjacency diagonal is not zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = graph.adjacency(i, j);
      if ((a != 0.0 && a != 1.0) || a != graph.adjacency(j, i))
        throw DimensionError("adjacency is not a symmetric 0/1 matrix");
    }
  }
}

Graph permute_graph(const Graph& graph, const std::vector<std::size_t>& perm) {
  const std::size_t n = graph.num_nodes();
  if (perm.size() != n) throw DimensionError("permutation length does not match node count");
  Graph out;
  out.class_label = graph.class_label;
  out.is_anomaly = graph.is_anomaly;
  out.adjacency.resize(n, n);
  out.features.resize(n, graph.features.cols());
  for (std::size_t i = 0; i < n; ++i) {
    out.features.row(i) = graph.features.row(perm[i]);
    for (std::size_t j = 0; j < n; ++j) out.adjacency(i, j) = graph.adjacency(perm[i], perm[j]);
  }
  return out;
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back({number, text});
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& text) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(text);
  while (std::getline(stream, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  return out;
}

long long parse_int(const std::string& file, std::size_t line, const std::string& field) {
  long long value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw FormatError(file, line, "expected an integer, got '" + field + "'");
  return value;
}

double parse_real(const std::string& file, std::size_t line, const std::string& field) {
  try {
    std::size_t used = 0;
    const double value = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw FormatError(file, line, "expected a real number, got '" + field + "'");
  }
}

fs::path required_file(const fs::path& root, const std::string& name, const char* suffix) {
  fs::path p = root / (name + suffix);
  if (!fs::exists(p)) throw IngestionError("missing mandatory file " + p.string());
  return p;
}

}  // namespace

std::vector<Graph> parse_tudataset(const fs::path& root, const std::string& name) {
  const fs::path edges_path = required_file(root, name, "_A.txt");
  const fs::path indicator_path = required_file(root, name, "_graph_indicator.txt");
  const fs::path labels_path = required_file(root, name, "_graph_labels.txt");
  const fs::path node_labels_path = root / (name + "_node_labels.txt");
  const fs::path node_attr_path = root / (name + "_node_attributes.txt");

  // Node -> (graph, local index).
  const auto indicator_lines = read_lines(indicator_path);
  const std::string indicator_file = indicator_path.filename().string();
  std::vector<std::size_t> node_graph;
  std::vector<std::size_t> node_local;
  std::vector<std::size_t> graph_sizes;
  node_graph.reserve(indicator_lines.size());
  for (const auto& line : indicator_lines) {
    const long long g = parse_int(indicator_file, line.number, split_fields(line.text).at(0));
    if (g < 1) throw FormatError(indicator_file, line.number, "graph ids are 1-indexed");
    const auto gi = static_cast<std::size_t>(g - 1);
    if (gi >= graph_sizes.size()) graph_sizes.resize(gi + 1, 0);
    node_graph.push_back(gi);
    node_local.push_back(graph_sizes[gi]++);
  }
  const std::size_t num_nodes = node_graph.size();

  const auto label_lines = read_lines(labels_path);
  const std::string labels_file = labels_path.filename().string();
  if (label_lines.size() != graph_sizes.size())
    throw FormatError(labels_file, label_lines.empty() ? 0 : label_lines.back().number,
                      "expected " + std::to_string(graph_sizes.size()) + " graph labels, found " +
                          std::to_string(label_lines.size()));

  std::vector<Graph> graphs(graph_sizes.size());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (graph_sizes[g] == 0)
      throw FormatError(indicator_file, 0, "graph " + std::to_string(g + 1) + " has no nodes");
    const auto n = static_cast<Eigen::Index>(graph_sizes[g]);
    graphs[g].adjacency = Matrix::Zero(n, n);
    graphs[g].class_label = static_cast<int>(
        parse_int(labels_file, label_lines[g].number, split_fields(label_lines[g].text).at(0)));
  }

  const std::string edges_file = edges_path.filename().string();
  for (const auto& line : read_lines(edges_path)) {
    const auto fields = split_fields(line.text);
    if (fields.size() != 2) throw FormatError(edges_file, line.number, "expected 'u, v'");
    const long long u = parse_int(edges_file, line.number, fields[0]);
    const long long v = parse_int(edges_file, line.number, fields[1]);
    for (long long id : {u, v})
      if (id < 1 || static_cast<std::size_t>(id) > num_nodes)
        throw FormatError(edges_file, line.number,
                          "edge references unknown node id " + std::to_string(id));
    const auto ui = static_cast<std::size_t>(u - 1);
    const auto vi = static_cast<std::size_t>(v - 1);
    if (node_graph[ui] != node_graph[vi])
      throw FormatError(edges_file, line.number, "edge connects nodes of different graphs");
    if (ui == vi) continue;  // self-loops are dropped on ingestion
    auto& adj = graphs[node_graph[ui]].adjacency;
    adj(node_local[ui], node_local[vi]) = 1.0;
    adj(node_local[vi], node_local[ui]) = 1.0;
  }

  // Optional node labels, one-hot over the distinct values present.
  std::vector<long long> node_label_values;
  std::map<long long, std::size_t> label_index;
  if (fs::exists(node_labels_path)) {
    const std::string file = node_labels_path.filename().string();
    const auto lines = read_lines(node_labels_path);
    if (lines.size() != num_nodes)
      throw FormatError(file, lines.empty() ? 0 : lines.back().number,
                        "expected " + std::to_string(num_nodes) + " node labels");
    for (const auto& line : lines) {
      node_label_values.push_back(parse_int(file, line.number, split_fields(line.text).at(0)));
      label_index.emplace(node_label_values.back(), 0);
    }
    std::size_t next = 0;
    for (auto& [value, index] : label_index) index = next++;
  }

  std::vector<std::vector<double>> attributes;
  std::size_t attr_dim = 0;
  if (fs::exists(node_attr_path)) {
    const std::string file = node_attr_path.filename().string();
    const auto lines = read_lines(node_attr_path);
    if (lines.size() != num_nodes)
      throw FormatError(file, lines.empty() ? 0 : lines.back().number,
                        "expected " + std::to_string(num_nodes) + " attribute rows");
    for (const auto& line : lines) {
      std::vector<double> row;
      for (const auto& f : split_fields(line.text)) row.push_back(parse_real(file, line.number, f));
      if (attributes.empty()) attr_dim = row.size();
      if (row.size() != attr_dim)
        throw FormatError(file, line.number, "inconsistent attribute dimension");
      attributes.push_back(std::move(row));
    }
  }

  const std::size_t label_dim = label_index.size();
  const bool featureless = label_dim == 0 && attr_dim == 0;
  const std::size_t dim = featureless ? 1 : label_dim + attr_dim;
  for (std::size_t g = 0; g < graphs.size(); ++g)
    graphs[g].features = featureless ? Matrix::Ones(static_cast<Eigen::Index>(graph_sizes[g]), 1)
                                     : Matrix::Zero(static_cast<Eigen::Index>(graph_sizes[g]),
                                                    static_cast<Eigen::Index>(dim));
  if (!featureless) {
    for (std::size_t v = 0; v < num_nodes; ++v) {
      auto& x = graphs[node_graph[v]].features;
      const auto row = static_cast<Eigen::Index>(node_local[v]);
      if (label_dim > 0)
        x(row, static_cast<Eigen::Index>(label_index.at(node_label_values[v]))) = 1.0;
      for (std::size_t k = 0; k < attr_dim; ++k)
        x(row, static_cast<Eigen::Index>(label_dim + k)) = attributes[v][k];
    }
  }
  return graphs;
}

void write_tudataset(const std::vector<Graph>& graphs, const fs::path& root,
                     const std::string& name) {
  fs::create_directories(root);
  auto open = [&](const char* suffix) {
    std::ofstream out(root / (name + suffix));
    if (!out) throw IoError("cannot write " + (root / (name + suffix)).string());
    out << std::setprecision(17);
    return out;
  };
  auto edges = open("_A.txt");
  auto indicator = open("_graph_indicator.txt");
  auto labels = open("_graph_labels.txt");
  auto attrs = open("_node_attributes.txt");

  std::size_t offset = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const Graph& graph = graphs[g];
    const std::size_t n = graph.num_nodes();
    for (std::size_t i = 0; i < n; ++i) {
      indicator << g + 1 << '\n';
      for (Eigen::Index k = 0; k < graph.features.cols(); ++k)
        attrs << (k ? ", " : "") << graph.features(static_cast<Eigen::Index>(i), k);
      attrs << '\n';
      for (std::size_t j = 0; j < n; ++j)
        if (graph.adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
          edges << offset + i + 1 << ", " << offset + j + 1 << '\n';
    }
    labels << graph.class_label << '\n';
    offset += n;
  }
}

std::vector<Graph> label_anomalies(std::vector<Graph> graphs, std::optional<int> anomaly_class) {
  if (graphs.empty()) throw ConfigError("cannot label an empty graph collection");
  const int target = anomaly_class.value_or(
      std::min_element(graphs.begin(), graphs.end(), [](const Graph& a, const Graph& b) {
        return a.class_label < b.class_label;
      })->class_label);
  const bool present = std::any_of(graphs.begin(), graphs.end(),
                                   [&](const Graph& g) { return g.class_label == target; });
  if (!present)
    throw ConfigError("anomaly class " + std::to_string(target) + " does not occur in the data");
  for (auto& g : graphs) g.is_anomaly = g.class_label == target;
  return graphs;
}

namespace {

void check_fraction(double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
}

// Splits one client's graphs (already in dealt order) into train/test pools.
ClientDataset split_client(int client_id, std::vector<Graph> graphs, double train_fraction) {
  ClientDataset client;
  client.client_id = client_id;
  const auto normals = static_cast<std::size_t>(
      std::count_if(graphs.begin(), graphs.end(), [](const Graph& g) { return !g.is_anomaly; }));
  const auto train_count =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(normals)));
  std::size_t taken = 0;
  for (auto& g : graphs) {
    if (!g.is_anomaly && taken < train_count) {
      client.train_normal.push_back(std::move(g));
      ++taken;
    } else {
      client.test.push_back(std::move(g));
    }
  }
  const auto test_anomalies = std::count_if(client.test.begin(), client.test.end(),
                                            [](const Graph& g) { return g.is_anomaly; });
  const auto test_normals = static_cast<std::ptrdiff_t>(client.test.size()) - test_anomalies;
  const std::string who = "client " + std::to_string(client_id);
  if (client.train_normal.empty()) throw PartitionError(who + " receives no normal training graphs");
  if (test_anomalies == 0) throw PartitionError(who + " receives no test anomalies");
  if (test_normals == 0) throw PartitionError(who + " receives no normal test graphs");

  client.feature_dim = client.train_normal.front().feature_dim();
  auto check_dim = [&](const Graph& g) {
    if (g.feature_dim() != client.feature_dim)
      throw DimensionError(who + " mixes feature dimensions " + std::to_string(g.feature_dim()) +
                           " and " + std::to_string(client.feature_dim));
  };
  std::for_each(client.train_normal.begin(), client.train_normal.end(), check_dim);
  std::for_each(client.test.begin(), client.test.end(), check_dim);
  return client;
}

}  // namespace

FederatedDataset partition_single(const std::vector<Graph>& graphs, std::size_t num_clients,
                                  double train_fraction, std::uint64_t seed) {
  if (num_clients < 1) throw ConfigError("num_clients must be at least 1");
  check_fraction(train_fraction);

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<Graph>> dealt(num_clients);
  for (std::size_t k = 0; k < order.size(); ++k) dealt[k % num_clients].push_back(graphs[order[k]]);

  FederatedDataset out;
  out.scenario = Scenario::SingleDataset;
  for (std::size_t c = 0; c < num_clients; ++c)
    out.clients.push_back(split_client(static_cast<int>(c), std::move(dealt[c]), train_fraction));
  return out;
}

FederatedDataset partition_multi(const std::vector<NamedDataset>& datasets, double train_fraction,
                                 std::uint64_t seed) {
  if (datasets.size() < 2)
    throw ConfigError("multi-dataset partitioning needs at least two datasets");
  check_fraction(train_fraction);

  std::size_t width = 0;
  for (const auto& [name, graphs] : datasets)
    for (const auto& g : graphs) width = std::max(width, g.feature_dim());

  std::mt19937_64 rng(seed);
  FederatedDataset out;
  out.scenario = Scenario::MultiDataset;
  for (std::size_t c = 0; c < datasets.size(); ++c) {
    std::vector<Graph> graphs = datasets[c].second;
    for (auto& g : graphs) {
      if (g.feature_dim() < width) {
        Matrix padded = Matrix::Zero(g.features.rows(), static_cast<Eigen::Index>(width));
        padded.leftCols(g.features.cols()) = g.features;
        g.features = std::move(padded);
      }
    }
    std::shuffle(graphs.begin(), graphs.end(), rng);
    try {
      out.clients.push_back(split_client(static_cast<int>(c), std::move(graphs), train_fraction));
    } catch (const PartitionError& e) {
      throw PartitionError("dataset '" + datasets[c].first + "': " + e.what());
    }
  }
  return out;
}

namespace {

void check_spec(const GeneratorSpec& spec) {
  if (spec.n_min < 1 || spec.n_max < spec.n_min)
    throw SpecError("node count must satisfy 1 <= n_min <= n_max");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(spec.p) || !prob(spec.p_in) || !prob(spec.p_out))
    throw SpecError("edge probabilities must lie in [0, 1]");
  if (spec.feature_dim < 1) throw SpecError("feature_dim must be positive");
}

}  // namespace

GeneratorSpec parse_generator_spec(const std::string& text) {
  static const std::regex pattern(
      R"(^\s*([a-z_]+)\s*\(([^)]*)\)\s*(?::\s*(ones|normal)(?:\((\d+)\))?)?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) throw SpecError("malformed generator spec '" + text + "'");

  GeneratorSpec spec;
  const std::string kind = m[1].str();
  if (kind == "er") spec.kind = GeneratorKind::ErdosRenyi;
  else if (kind == "cycle") spec.kind = GeneratorKind::Cycle;
  else if (kind == "clique") spec.kind = GeneratorKind::Clique;
  else if (kind == "two_community") spec.kind = GeneratorKind::TwoCommunity;
  else throw SpecError("unknown generator '" + kind + "'");

  std::vector<std::string> args = split_fields(m[2].str());
  const std::size_t expected = spec.kind == GeneratorKind::ErdosRenyi     ? 2
                               : spec.kind == GeneratorKind::TwoCommunity ? 3
                                                                          : 1;
  if (args.size() != expected)
    throw SpecError("generator '" + kind + "' takes " + std::to_string(expected) + " arguments");

  try {
    const auto dots = args[0].find("..");
    if (dots == std::string::npos) {
      spec.n_min = spec.n_max = std::stoi(args[0]);
    } else {
      spec.n_min = std::stoi(args[0].substr(0, dots));
      spec.n_max = std::stoi(args[0].substr(dots + 2));
    }
    if (spec.kind == GeneratorKind::ErdosRenyi) spec.p = std::stod(args[1]);
    if (spec.kind == GeneratorKind::TwoCommunity) {
      spec.p_in = std::stod(args[1]);
      spec.p_out = std::stod(args[2]);
    }
  } catch (const std::logic_error&) {
    throw SpecError("non-numeric argument in generator spec '" + text + "'");
  }
  if (m[3].matched && m[3].str() == "normal") spec.features = FeatureKind::StandardNormal;
  if (m[4].matched) spec.feature_dim = std::stoi(m[4].str());
  check_spec(spec);
  return spec;
}

std::vector<Graph> generate_synthetic(const GeneratorSpec& spec, std::size_t count,
                                      std::uint64_t seed) {
  check_spec(spec);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size_dist(spec.n_min, spec.n_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Graph> graphs;
  graphs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int n = size_dist(rng);
    Graph g;
    g.adjacency = Matrix::Zero(n, n);
    auto connect = [&](int i, int j) { g.adjacency(i, j) = g.adjacency(j, i) = 1.0; };
    switch (spec.kind) {
      case GeneratorKind::ErdosRenyi:
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (unit(rng) < spec.p) connect(i, j);
        break;
      case GeneratorKind::Cycle:
        for (int i = 0; i + 1 < n; ++i) connect(i, i + 1);
        if (n > 2) connect(n - 1, 0);
        break;
      case GeneratorKind::Clique:
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j) connect(i, j);
        break;
      case GeneratorKind::TwoCommunity: {
        const int half = n / 2;
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (unit(rng) < ((i < half) == (j < half) ? spec.p_in : spec.p_out)) connect(i, j);
        break;
      }
    }
    if (spec.features == FeatureKind::Ones) {
      g.features = Matrix::Ones(n, spec.feature_dim);
    } else {
      g.features.resize(n, spec.feature_dim);
      for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = normal(rng);
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace fedcigar
