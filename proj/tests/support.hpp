#pragma once

#include "fedcigar/autodiff.hpp"
#include "fedcigar/graph.hpp"
#include "fedcigar/model.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <vector>

namespace fedcigar::testutil {

/// Erdos-Renyi graph with Gaussian features; no isolated-node guarantee.
Graph random_graph(int n, double p, int feature_dim, std::mt19937_64& rng);

/// Uniformly random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng);

/// Central-difference gradient of `f` with respect to every entry of `t`.
Matrix numeric_gradient(ad::Tensor& t, const std::function<double()>& f, double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace fedcigar::testutil
