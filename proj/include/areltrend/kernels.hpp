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

// Data-parallel inner loops of the sampler and the spatial statistics.
//
// Every kernel exists twice: serial:: is the reference implementation kept
// for tests and benchmarks, parallel:: distributes the per-unit (or
// per-permutation) work with OpenMP. Both write per-item partial results into
// a buffer and reduce it serially in index order, so the two versions return
// bit-identical values for any thread count.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "areltrend/graph.hpp"

namespace areltrend::kernels {

// Inputs of the residual and right-hand-side kernels: the response panel,
// the covariates and the period columns used for fitting (t = column + 1).
struct ResidualInputs {
  const Eigen::MatrixXd& y;  // n x T
  const Eigen::MatrixXd& Z;  // n x d (d may be 0)
  std::span<const int> columns;
};

// residual_sum_squares: sum of (y_it - z_i'gamma - alpha_i - beta_i t)^2.
// car_quadratic_form: (v - c1)' [rho (D_W - W) + (1 - rho) I] (v - c1) over active edges.
// moran_cross_sum: sum_i sum_j w_ij x_i x_j for centred x.
// design_rhs: X'y for the design with blocks (gamma, alpha, beta).
// moran_permutations: Moran's I of n_perm seeded shuffles of x.

namespace serial {
double residual_sum_squares(const ResidualInputs& in, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta);
double car_quadratic_form(const AdjacencyGraph& graph, EdgeMask active, double rho,
                          const Eigen::VectorXd& v, double center);
double moran_cross_sum(const AdjacencyGraph& graph, std::span<const double> centered);
Eigen::VectorXd design_rhs(const ResidualInputs& in);
std::vector<double> moran_permutations(std::span<const double> x, const AdjacencyGraph& graph,
                                       int n_perm, std::uint64_t seed);
}  // namespace serial

namespace parallel {
double residual_sum_squares(const ResidualInputs& in, const Eigen::VectorXd& gamma,
                            const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta);
double car_quadratic_form(const AdjacencyGraph& graph, EdgeMask active, double rho,
                          const Eigen::VectorXd& v, double center);
double moran_cross_sum(const AdjacencyGraph& graph, std::span<const double> centered);
Eigen::VectorXd design_rhs(const ResidualInputs& in);
std::vector<double> moran_permutations(std::span<const double> x, const AdjacencyGraph& graph,
                                       int n_perm, std::uint64_t seed);
}  // namespace parallel

// Below this many units the parallel kernels fall back to the serial ones.
inline constexpr int kParallelThreshold = 512;

}  // namespace areltrend::kernels
