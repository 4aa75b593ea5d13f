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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"
#include "areltrend/model.hpp"
#include "areltrend/rng.hpp"

namespace areltrend {

// Design of the stacked regression y = X theta + e over the training columns.
// Row i * T_train + k (k-th training column of unit i, time t = column + 1)
// holds z_i in the gamma block, 1 at alpha_i and t at beta_i.
class DesignMatrix {
 public:
  DesignMatrix(Eigen::MatrixXd y, Eigen::MatrixXd Z, std::vector<int> train_columns);

  int n() const { return static_cast<int>(y_.rows()); }
  int d() const { return static_cast<int>(Z_.cols()); }
  int parameters() const { return d() + 2 * n(); }
  int observations() const { return n() * static_cast<int>(columns_.size()); }

  const Eigen::MatrixXd& y() const { return y_; }
  const Eigen::MatrixXd& Z() const { return Z_; }
  std::span<const int> columns() const { return columns_; }

  const SparseMatrix& xtx() const { return xtx_; }
  const Eigen::VectorXd& xty() const { return xty_; }

  // Explicit N x (d + 2n) matrix; used by tests and small diagnostics.
  SparseMatrix explicit_matrix() const;

  double residual_sum_squares(const ThetaState& state) const;

  // Replaces the responses (prior-predictive resampling); X'X is unchanged.
  void set_response(Eigen::MatrixXd y);

 private:
  void build_crossproducts();

  Eigen::MatrixXd y_;
  Eigen::MatrixXd Z_;
  std::vector<int> columns_;
  SparseMatrix xtx_;
  Eigen::VectorXd xty_;
};

// Conditional law N(mean, Q^{-1}) of theta with Q = Omega0 + X'X / sigma^2,
// held as a sparse Cholesky factor with AMD fill-reducing ordering. The
// symbolic analysis is reused while the sparsity pattern is unchanged.
class ThetaConditional {
 public:
  explicit ThetaConditional(const DesignMatrix& design) : design_(&design) {}

  // Throws NumericalError when Q is not positive definite.
  void condition(const JointPrior& prior, double sigma2);

  const Eigen::VectorXd& mean() const { return mean_; }
  const SparseMatrix& precision() const { return precision_; }
  Eigen::MatrixXd covariance() const;  // dense; for tests
  Eigen::VectorXd draw(Rng& rng) const;
  int analyses() const { return analyses_; }

 private:
  using Factor = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  const DesignMatrix* design_;
  Factor factor_;
  SparseMatrix precision_;
  Eigen::VectorXd mean_;
  Eigen::Index pattern_nnz_ = -1;
  int analyses_ = 0;
};

struct NormalLaw {
  double mean = 0.0;
  double variance = 0.0;
};

// alpha0 | alpha ~ N(1'S v / 1'S 1, tau2 / 1'S 1) with S = Sigma^{-1}.
NormalLaw mean_hyper_conditional(const SparseMatrix& sigma_inv, const Eigen::VectorXd& v,
                                 double tau2);

struct VarianceConditionals {
  InverseGamma sigma;
  InverseGamma gamma;
  InverseGamma alpha;
  InverseGamma beta;
};

VarianceConditionals variance_conditionals(const ThetaState& state, const DesignMatrix& design,
                                           const PriorSpec& prior, const SparseMatrix& sigma_inv_alpha,
                                           const SparseMatrix& sigma_inv_beta);

double log_beta_density(double x, double a, double b);

// Metropolis-Hastings for the shared CAR parameter rho with proposal
// Beta(b rho / (1 - rho), b), which has mean rho.
class RhoUpdater {
 public:
  RhoUpdater(ModelFamily family, const AdjacencyGraph& graph, BetaPrior prior, double mh_b);

  // log p(rho | everything else) up to a constant: CAR densities of alpha and
  // beta (sparse log-determinants) plus the Beta prior.
  double log_target(double rho, const ThetaState& state);
  double log_proposal(double to, double from) const;
  // log of the acceptance ratio before the min with 1.
  double log_acceptance(double proposed, const ThetaState& state);
  // Returns true on acceptance.
  bool update(ThetaState& state, Rng& rng);

 private:
  double log_det(EdgeMask mask, double rho, int slot);

  using Factor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  ModelFamily family_;
  const AdjacencyGraph* graph_;
  BetaPrior prior_;
  double mh_b_;
  Factor factors_[2];
  bool analyzed_[2] = {false, false};
};

// Per-edge Gibbs updates of a variable border vector. Keeps a Cholesky factor
// of Sigma^{-1}(W) and applies flips as rank-one Sherman-Morrison corrections;
// the factor is refreshed after kMaxPendingFlips flips and on every reset().
class BorderSampler {
 public:
  static constexpr int kMaxPendingFlips = 32;

  explicit BorderSampler(const AdjacencyGraph& graph);

  void reset(std::span<const std::uint8_t> w, double rho);

  std::span<const std::uint8_t> w() const { return w_; }
  double rho() const { return rho_; }

  // det Sigma^{-1}(w_e = 1) / det Sigma^{-1}(w_e = 0) given all other entries,
  // by the matrix determinant lemma on rho (e_i - e_j)(e_i - e_j)'.
  double determinant_ratio(int edge) const;

  // P(w_e = 1 | everything else).
  double flip_probability(int edge, const Eigen::VectorXd& v, double tau2, double phi) const;

  // Sets w_e and updates the inverse representation.
  void set(int edge, std::uint8_t value);

  int refreshes() const { return refreshes_; }

 private:
  void refactor();
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& x) const;
  double edge_quadratic(int edge) const;  // u' A^{-1} u

  using Factor = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  const AdjacencyGraph* graph_;
  std::vector<std::uint8_t> w_;
  double rho_ = 0.5;
  Factor factor_;
  bool analyzed_ = false;
  std::vector<Eigen::VectorXd> corrections_;  // y_k = A_{k-1}^{-1} u_k
  std::vector<double> coefficients_;          // c_k = s_k / (1 + s_k u_k' y_k)
  int refreshes_ = 0;
};

// Convenience: flip probability from scratch for a given border vector.
double flip_probability(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                        const Eigen::VectorXd& v, double tau2, double phi, int edge);

// Systematic scan over the base edges in index order. Returns the number of
// entries that changed; per-edge change counts are accumulated into flips.
int update_borders(BorderSampler& sampler, std::vector<std::uint8_t>& w, const Eigen::VectorXd& v,
                   double tau2, double phi, double rho, Rng& rng, std::vector<int>& flips);

// Beta(a + sum w, b + sum (1 - w)).
BetaPrior phi_conditional(std::span<const std::uint8_t> w, BetaPrior prior);

struct ChainStats {
  int rho_proposals = 0;
  int rho_accepts = 0;
  std::vector<int> flips_alpha;
  std::vector<int> flips_beta;
  long long clipped_variances = 0;
};

// One full Gibbs scan per step(), in the order
// theta -> (alpha0, beta0) -> variances -> rho -> W^alpha -> W^beta -> (phi^alpha, phi^beta).
class GibbsSampler {
 public:
  GibbsSampler(const DesignMatrix& design, const AdjacencyGraph& graph, ModelFamily family,
               PriorSpec prior, double mh_b);

  void step(ThetaState& state, Rng& rng);

  // Holds alpha0 and beta0 fixed (used by prior-invariance checks, where the
  // flat mean prior would make the joint law improper).
  void set_update_mean_hyper(bool enabled) { update_mean_hyper_ = enabled; }

  const ChainStats& stats() const { return stats_; }
  const ThetaConditional& theta_conditional() const { return theta_; }

 private:
  double clip(double variance);

  const DesignMatrix* design_;
  const AdjacencyGraph* graph_;
  ModelFamily family_;
  PriorSpec prior_;
  ThetaConditional theta_;
  RhoUpdater rho_;
  BorderSampler borders_;
  bool update_mean_hyper_ = true;
  ChainStats stats_;
};

// Retained draws of one chain.
struct ChainOutput {
  int chain_index = 0;
  std::uint64_t seed = 0;
  ModelFamily family = ModelFamily::SpatialCAR;
  Eigen::MatrixXd gamma;  // draws x d
  Eigen::MatrixXd alpha;  // draws x n
  Eigen::MatrixXd beta;   // draws x n
  std::vector<double> alpha0, beta0, sigma2, tau2_alpha, tau2_beta, tau2_gamma;
  std::vector<double> rho;  // empty unless the family has a CAR prior
  std::vector<double> phi_alpha, phi_beta;
  using BorderDraws = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  BorderDraws w_alpha;  // draws x edges; empty when fixed
  BorderDraws w_beta;
  ChainStats stats;
  double seconds = 0.0;

  int draws() const { return static_cast<int>(sigma2.size()); }
};

struct ChainInputs {
  const DesignMatrix* design = nullptr;
  const AdjacencyGraph* graph = nullptr;
  ModelConfig config;
  PriorSpec prior;
  ThetaState init;
  std::vector<double> fixed_gamma;  // two-stage: reported gamma for every draw
};

// Runs one chain; chain c draws from stream (seed, c). Errors are rethrown as
// NumericalError naming the iteration.
ChainOutput run_chain(const ChainInputs& inputs, int chain_index);

ChainOutput merge_chains(std::span<const ChainOutput> chains);

// Gelman-Rubin potential scale reduction over equal-length chains.
double potential_scale_reduction(std::span<const std::vector<double>> chains);

// Everything a Bayesian fit produces.
struct PosteriorRun {
  ModelConfig config;
  PriorSpec prior;
  std::vector<std::string> unit_ids;
  std::vector<std::string> covariate_names;
  std::vector<ChainOutput> chains;
  ChainOutput merged;
};

// Builds the design, tunes priors, initializes and runs config.chain.n_chains
// chains (concurrently when OpenMP has threads available).
PosteriorRun run_model(const ArealPanel& panel, const CovariateMatrix& covariates,
                       const AdjacencyGraph& graph, const ModelConfig& config,
                       std::span<const int> train_columns);

// Starting state: no-shrinkage estimates, empirical-Bayes variance means,
// rho = 0.5, all borders on, phi at its prior mean.
ThetaState initial_state(const ArealPanel& panel, const CovariateMatrix& covariates,
                         const AdjacencyGraph& graph, const ModelConfig& config,
                         const PriorSpec& prior, std::span<const int> train_columns);

}  // namespace areltrend
