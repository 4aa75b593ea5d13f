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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"
#include "areltrend/model.hpp"
#include "areltrend/sampler.hpp"

namespace areltrend {

enum class GraphShape { Grid, Cycle, Path, Custom };

struct SyntheticSpec {
  GraphShape shape = GraphShape::Grid;
  int rows = 10;  // grid
  int cols = 10;
  int nodes = 4;  // cycle, path and custom
  std::vector<Edge> custom_edges;

  double alpha0 = 2.0;
  double beta0 = -0.05;
  double tau2_alpha = 0.5;
  double tau2_beta = 0.003;
  double sigma2 = 0.08;
  double rho = 0.9;
  // Base-edge indices with w = 0 in the generating W^alpha / W^beta.
  std::vector<int> barriers_alpha;
  std::vector<int> barriers_beta;
  // Deterministic per-unit shifts added to the drawn alpha / beta (may be empty).
  std::vector<double> alpha_offset;
  std::vector<double> beta_offset;
  Eigen::VectorXd gamma;  // covariate effects; its length sets d

  int periods = 10;
  int first_period = 2006;
  std::uint64_t seed = 1;

  // Throws InputError on an invalid spec.
  void validate() const;
};

struct SyntheticTruth {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  std::vector<std::uint8_t> w_alpha;
  std::vector<std::uint8_t> w_beta;
};

struct SyntheticData {
  ArealPanel counts;  // integer counts, y = ihs(counts)
  ArealPanel exact;   // real-valued y as generated
  CovariateMatrix covariates;
  AdjacencyGraph graph;
  SyntheticTruth truth;
};

// Unit ids u0, u1, ... zero-padded so that lexicographic and index order agree.
AdjacencyGraph make_graph(const SyntheticSpec& spec);

// alpha ~ N(alpha0 1, tau2 Sigma(W^alpha)), beta likewise, z_i iid standard
// normal (standardized), y_it = z_i'gamma + alpha_i + beta_i t + e_it and
// counts round(sinh(y + log 2)) clipped at 0. Deterministic given the seed.
SyntheticData simulate(const SyntheticSpec& spec);

// Draw from N(center 1, tau2 Q^{-1}) for a sparse precision Q.
Eigen::VectorXd draw_car(const SparseMatrix& precision, double center, double tau2, Rng& rng);

// Dense brute-force oracles. They rebuild every quantity from the model
// definition with dense algebra and share no code with the sampler.
namespace oracle {

inline constexpr int kMaxDenseUnits = 50;
inline constexpr int kMaxEnumeratedEdges = 6;

// rho (D_W - W) + (1 - rho) I over the active edges (empty mask: all).
Eigen::MatrixXd precision(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho);

double log_det(const Eigen::MatrixXd& spd);

// Explicit stacked design: rows (unit i, training column k), columns (gamma, alpha, beta).
Eigen::MatrixXd design(const Eigen::MatrixXd& Z, int n, std::span<const int> columns);

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

GaussianLaw theta_conditional(const Eigen::MatrixXd& y, const Eigen::MatrixXd& Z,
                              std::span<const int> columns, ModelFamily family,
                              const AdjacencyGraph& graph, const ThetaState& state, bool flat_gamma);

// (mean, variance) of alpha0 (for_alpha) or beta0 given the rest.
std::pair<double, double> mean_hyper(ModelFamily family, const AdjacencyGraph& graph,
                                     const ThetaState& state, bool for_alpha);

// Shape and rate of the sigma^2, tau_gamma^2, tau_alpha^2 and tau_beta^2 conditionals.
struct VarianceLaws {
  InverseGamma sigma, gamma, alpha, beta;
};
VarianceLaws variance_conditionals(const Eigen::MatrixXd& y, const Eigen::MatrixXd& Z,
                                   std::span<const int> columns, ModelFamily family,
                                   const AdjacencyGraph& graph, const ThetaState& state,
                                   const VarianceHyper& hyper);

// P(w_e = 1 | rest) from the two full log densities.
double flip_probability(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                        const Eigen::VectorXd& v, double center, double tau2, double phi, int edge);

// det A(w with w_e = 1) / det A(w with w_e = 0).
double determinant_ratio(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                         int edge);

// Unnormalized log posterior of every border configuration (bit e of the
// index is w_e) given v, tau2, rho and phi.
struct BorderEnumeration {
  int edges = 0;
  std::vector<double> log_density;

  // P(w_e = 1 | w_{-e}) at configuration w.
  double conditional(std::span<const std::uint8_t> w, int edge) const;
  // Marginal P(w_e = 1).
  double marginal(int edge) const;
};

BorderEnumeration enumerate_w_posterior(const AdjacencyGraph& graph, const Eigen::VectorXd& v,
                                        double center, double tau2, double rho, double phi);

}  // namespace oracle

}  // namespace areltrend
