// Copyright 2026 The areltrend Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"
#include "areltrend/model.hpp"
#include "areltrend/rng.hpp"

namespace areltrend::testing {

// Frozen 4-unit path graph u0 - u1 - u2 - u3 observed over T = 3 periods
// with one covariate, and a fixed sampler state for the variable-borders family.
struct PathFixture {
  AdjacencyGraph graph;
  Eigen::MatrixXd y;
  Eigen::MatrixXd Z;
  std::vector<int> columns{0, 1, 2};
  ThetaState state;
  VarianceHyper hyper;
};

inline PathFixture path_fixture() {
  PathFixture f;
  f.graph = AdjacencyGraph({"u0", "u1", "u2", "u3"}, {{0, 1}, {1, 2}, {2, 3}});
  f.y.resize(4, 3);
  f.y << 1.10, 1.32, 1.29,  //
      1.71, 1.64, 1.93,     //
      0.42, 0.61, 0.55,     //
      1.05, 0.97, 1.21;
  f.Z.resize(4, 1);
  f.Z << -1.2, 0.3, 0.5, 0.4;
  auto& s = f.state;
  s.gamma = Eigen::VectorXd::Constant(1, 0.2);
  s.alpha.resize(4);
  s.alpha << 1.0, 1.3, 0.8, 1.1;
  s.beta.resize(4);
  s.beta << 0.1, -0.05, 0.02, 0.0;
  s.alpha0 = 1.05;
  s.beta0 = 0.01;
  s.sigma2 = 0.3;
  s.tau2_alpha = 0.4;
  s.tau2_beta = 0.02;
  s.tau2_gamma = 1.5;
  s.rho = 0.7;
  s.w_alpha = {1, 0, 1};
  s.w_beta = {1, 1, 0};
  s.phi_alpha = 0.8;
  s.phi_beta = 0.85;
  f.hyper.sigma = {102.0, 30.3};
  f.hyper.alpha = {102.0, 40.4};
  f.hyper.beta = {102.0, 2.02};
  f.hyper.gamma = {102.0, 151.5};
  return f;
}

// Random connected graph on n nodes: a random spanning tree plus extra edges.
inline AdjacencyGraph random_graph(int n, int extra_edges, Rng& rng) {
  std::vector<Edge> edges;
  for (int k = 1; k < n; ++k) {
    const int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    edges.push_back({parent, k});
  }
  for (int k = 0; k < extra_edges; ++k) {
    const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int b = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
  }
  std::vector<std::string> ids(n);
  for (int k = 0; k < n; ++k) ids[k] = "n" + std::to_string(k);
  return AdjacencyGraph(std::move(ids), std::move(edges));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("areltrend_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Kolmogorov-Smirnov test of a sample against a continuous CDF. The p-value
// uses the asymptotic Kolmogorov distribution with Stephens' small-sample
// correction lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

template <typename Cdf>
KsResult ks_test(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    d = std::max({d, f - k / n, (k + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda <= 0.0) return {d, 1.0};
  double q = 0.0;
  if (lambda < 1.18) {
    // Jacobi theta form of the Kolmogorov CDF converges fast for small lambda.
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int j = 1; j <= 100; ++j) {
      const double k = 2.0 * j - 1.0;
      cdf += std::exp(-k * k * pi * pi / (8.0 * lambda * lambda));
    }
    q = 1.0 - std::sqrt(2.0 * pi) / lambda * cdf;
  } else {
    for (int j = 1; j <= 100; ++j) {
      const double term = std::exp(-2.0 * j * j * lambda * lambda);
      q += (j % 2 == 1 ? 2.0 : -2.0) * term;
      if (term < 1e-16) break;
    }
  }
  return {d, std::clamp(q, 0.0, 1.0)};
}

}  // namespace areltrend::testing
