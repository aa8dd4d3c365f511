#include "support.hpp"

#include <algorithm>
#include <numeric>

namespace fedcigar::testutil {

Graph random_graph(int n, double p, int feature_dim, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  std::normal_distribution<double> normal;
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
  g.features.resize(n, feature_dim);
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = normal(rng);
  return g;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Matrix numeric_gradient(ad::Tensor& t, const std::function<double()>& f, double h) {
  Matrix grad(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.value.size(); ++i) {
    double& x = t.value.data()[i];
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() /
                   ("fedcigar_" + tag + "_" + std::to_string(rng() % 1000000007ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fedcigar::testutil
