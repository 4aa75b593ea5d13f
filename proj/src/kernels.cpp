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

#include "areltrend/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "areltrend/rng.hpp"

namespace areltrend::kernels {

namespace {

// Per-item terms shared by both versions so they agree bit for bit.

inline double unit_residual_ss(const ResidualInputs& in, const Eigen::VectorXd& gamma,
                               const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta, int i) {
  const double level = (in.Z.cols() > 0 ? in.Z.row(i).dot(gamma) : 0.0) + alpha(i);
  double ss = 0.0;
  for (const int col : in.columns) {
    const double r = in.y(i, col) - level - beta(i) * static_cast<double>(col + 1);
    ss += r * r;
  }
  return ss;
}

inline double unit_car_term(const AdjacencyGraph& graph, EdgeMask active, double rho,
                            const Eigen::VectorXd& v, double center, int i) {
  double smooth = 0.0;
  for (const auto& inc : graph.incident(i)) {
    if (inc.neighbor <= i) continue;
    if (!active.empty() && !active[inc.edge]) continue;
    const double diff = v(i) - v(inc.neighbor);
    smooth += diff * diff;
  }
  const double dev = v(i) - center;
  return rho * smooth + (1.0 - rho) * dev * dev;
}

inline double unit_moran_term(const AdjacencyGraph& graph, std::span<const double> x, int i) {
  double s = 0.0;
  for (const auto& inc : graph.incident(i)) s += x[inc.neighbor];
  return x[i] * s;
}

inline void unit_rhs(const ResidualInputs& in, int i, double& sum_y, double& sum_ty) {
  sum_y = 0.0;
  sum_ty = 0.0;
  for (const int col : in.columns) {
    sum_y += in.y(i, col);
    sum_ty += static_cast<double>(col + 1) * in.y(i, col);
  }
}

Eigen::VectorXd assemble_rhs(const ResidualInputs& in, const Eigen::VectorXd& sum_y,
                             const Eigen::VectorXd& sum_ty) {
  const auto n = in.y.rows();
  const auto d = in.Z.cols();
  Eigen::VectorXd rhs(d + 2 * n);
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += in.Z(i, j) * sum_y(i);
    rhs(j) = s;
  }
  rhs.segment(d, n) = sum_y;
  rhs.segment(d + n, n) = sum_ty;
  return rhs;
}

inline double permuted_moran(std::span<const double> centered, const AdjacencyGraph& graph,
                             double denom, std::uint64_t seed, int k) {
  std::vector<double> x(centered.begin(), centered.end());
  Rng rng(seed, static_cast<std::uint64_t>(k));
  for (std::size_t i = x.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(x[i], x[j]);
  }
  double cross = 0.0;
  for (int i = 0; i < graph.size(); ++i) cross += unit_moran_term(graph, x, i);
  return denom * cross;
}

struct PermutationSetup {
  std::vector<double> centered;
  double denom = 0.0;  // n / (S0 * sum x^2)
};

PermutationSetup permutation_setup(std::span<const double> x, const AdjacencyGraph& graph) {
  PermutationSetup setup;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  setup.centered.reserve(x.size());
  double ss = 0.0;
  for (const double v : x) {
    setup.centered.push_back(v - mean);
    ss += (v - mean) * (v - mean);
  }
  const double s0 = 2.0 * graph.edge_count();
  setup.denom = static_cast<double>(x.size()) / (s0 * ss);
  return setup;
}

}  // namespace

// ---- serial reference ------------------------------------------------------------

namespace serial {

double residual_sum_squares(const ResidualInputs& in, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < in.y.rows(); ++i) {
    total += unit_residual_ss(in, gamma, alpha, beta, static_cast<int>(i));
  }
  return total;
}

double car_quadratic_form(const AdjacencyGraph& graph, EdgeMask active, double rho,
                          const Eigen::VectorXd& v, double center) {
  double total = 0.0;
  for (int i = 0; i < graph.size(); ++i) total += unit_car_term(graph, active, rho, v, center, i);
  return total;
}

double moran_cross_sum(const AdjacencyGraph& graph, std::span<const double> centered) {
  double total = 0.0;
  for (int i = 0; i < graph.size(); ++i) total += unit_moran_term(graph, centered, i);
  return total;
}

Eigen::VectorXd design_rhs(const ResidualInputs& in) {
  const auto n = in.y.rows();
  Eigen::VectorXd sum_y(n), sum_ty(n);
  for (Eigen::Index i = 0; i < n; ++i) unit_rhs(in, static_cast<int>(i), sum_y(i), sum_ty(i));
  return assemble_rhs(in, sum_y, sum_ty);
}

std::vector<double> moran_permutations(std::span<const double> x, const AdjacencyGraph& graph,
                                       int n_perm, std::uint64_t seed) {
  const auto setup = permutation_setup(x, graph);
  std::vector<double> stats(static_cast<std::size_t>(n_perm));
  for (int k = 0; k < n_perm; ++k) stats[k] = permuted_moran(setup.centered, graph, setup.denom, seed, k);
  return stats;
}

}  // namespace serial

// ---- OpenMP ------------------------------------------------------------------------

namespace parallel {

double residual_sum_squares(const ResidualInputs& in, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  const int n = static_cast<int>(in.y.rows());
  if (n < kParallelThreshold) return serial::residual_sum_squares(in, gamma, alpha, beta);
  std::vector<double> partial(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) partial[i] = unit_residual_ss(in, gamma, alpha, beta, i);
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

double car_quadratic_form(const AdjacencyGraph& graph, EdgeMask active, double rho,
                          const Eigen::VectorXd& v, double center) {
  const int n = graph.size();
  if (n < kParallelThreshold) return serial::car_quadratic_form(graph, active, rho, v, center);
  std::vector<double> partial(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) partial[i] = unit_car_term(graph, active, rho, v, center, i);
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

double moran_cross_sum(const AdjacencyGraph& graph, std::span<const double> centered) {
  const int n = graph.size();
  if (n < kParallelThreshold) return serial::moran_cross_sum(graph, centered);
  std::vector<double> partial(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) partial[i] = unit_moran_term(graph, centered, i);
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

Eigen::VectorXd design_rhs(const ResidualInputs& in) {
  const int n = static_cast<int>(in.y.rows());
  if (n < kParallelThreshold) return serial::design_rhs(in);
  Eigen::VectorXd sum_y(n), sum_ty(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) unit_rhs(in, i, sum_y(i), sum_ty(i));
  return assemble_rhs(in, sum_y, sum_ty);
}

std::vector<double> moran_permutations(std::span<const double> x, const AdjacencyGraph& graph,
                                       int n_perm, std::uint64_t seed) {
  const auto setup = permutation_setup(x, graph);
  std::vector<double> stats(static_cast<std::size_t>(n_perm));
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < n_perm; ++k) stats[k] = permuted_moran(setup.centered, graph, setup.denom, seed, k);
  return stats;
}

}  // namespace parallel

}  // namespace areltrend::kernels
