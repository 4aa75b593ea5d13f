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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"

namespace areltrend {

enum class ModelFamily {
  GlobalTrend,               // y = a + z'g + b t
  NoShrinkage,               // per-unit least squares
  GlobalShrinkage,           // iid normal priors on alpha, beta
  SpatialCAR,                // Leroux CAR priors over the base graph
  VariableBorders,           // CAR with random W^alpha and W^beta
  VariableBordersAlphaOnly,  // CAR with random W^alpha, fixed W^beta
};

enum class PriorMode { EmpiricalBayes, Noninformative };

// Beta(9,1) on phi (few barriers expected) or the Beta(1,9) alternative.
enum class PhiPrior { MostlyConnected, MostlyBarriers };

std::string_view to_string(ModelFamily family);
std::string_view cli_name(ModelFamily family);
ModelFamily parse_model_family(std::string_view text);  // cli or canonical name

bool is_bayesian(ModelFamily family);
bool has_spatial_prior(ModelFamily family);
bool has_variable_alpha(ModelFamily family);
bool has_variable_beta(ModelFamily family);

// Inverse-Gamma(shape, rate), density proportional to x^(-shape-1) exp(-rate/x).
// Improper limits (shape <= 0 or rate = 0) encode the noninformative priors.
struct InverseGamma {
  double shape = 0.0;
  double rate = 0.0;
  double mean() const { return rate / (shape - 1.0); }
  friend bool operator==(const InverseGamma&, const InverseGamma&) = default;
};

struct VarianceHyper {
  InverseGamma sigma;
  InverseGamma alpha;
  InverseGamma beta;
  InverseGamma gamma;
};

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
  double mean() const { return a / (a + b); }
};

struct ChainSettings {
  int n_iter = 2050;
  int burn_in = 50;
  int thin = 2;
  int n_chains = 1;
  std::uint64_t seed = 1;

  int retained() const { return (n_iter - burn_in) / thin; }
};

struct ModelConfig {
  ModelFamily family = ModelFamily::SpatialCAR;
  PriorMode prior_mode = PriorMode::EmpiricalBayes;
  // Explicit hyperparameters; when unset they are tuned by empirical Bayes.
  std::optional<VarianceHyper> ig_hyper;
  double prior_cv = 0.1;  // coefficient of variation of the tuned IG priors
  BetaPrior rho_prior{10.0, 10.0};
  PhiPrior phi_prior = PhiPrior::MostlyConnected;
  double mh_b = 10.0;
  ChainSettings chain;
  bool two_stage = false;       // fix gamma at the stage-one OLS estimate
  bool disperse_starts = true;  // perturb the start of chains 2..K

  BetaPrior phi_beta_prior() const {
    return phi_prior == PhiPrior::MostlyConnected ? BetaPrior{9.0, 1.0} : BetaPrior{1.0, 9.0};
  }

  // Throws InputError on an invalid combination.
  void validate() const;
};

// One state of the Gibbs sampler.
struct ThetaState {
  Eigen::VectorXd gamma;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double sigma2 = 1.0;
  double tau2_alpha = 1.0;
  double tau2_beta = 1.0;
  double tau2_gamma = 1.0;
  double rho = 0.5;
  std::vector<std::uint8_t> w_alpha;  // over graph.edges(); empty when W^alpha is fixed
  std::vector<std::uint8_t> w_beta;
  double phi_alpha = 0.9;
  double phi_beta = 0.9;

  // Stacked theta = (gamma, alpha, beta).
  Eigen::VectorXd theta() const;
  void set_theta(const Eigen::VectorXd& theta);
};

// Priors in the form the sampler consumes.
struct PriorSpec {
  VarianceHyper variance;
  bool flat_gamma = false;  // no tau_gamma, zero gamma precision block
  BetaPrior rho;
  BetaPrior phi;
};

// IG(a, b) with prior mean m and coefficient of variation cv: a = 2 + 1/cv^2,
// b = m (a - 1). cv = 0.1 gives a = 102.
InverseGamma inverse_gamma_from_mean(double mean, double cv = 0.1);

// Variance estimates from the no-shrinkage fit that empirical Bayes matches.
struct NoShrinkageVariances {
  double sigma2 = 0.0;       // residual variance, RSS / (N - 2n)
  double tau2_alpha = 0.0;   // sample variance of the unit intercepts
  double tau2_beta = 0.0;    // sample variance of the unit slopes
  double tau2_gamma = 0.0;   // mean square of the stage-one coefficients
};

VarianceHyper tune_empirical_bayes(const NoShrinkageVariances& estimates, double cv = 0.1);

// Fits the no-shrinkage model on the training columns and tunes from it.
// Throws NumericalError when the fit leaves no residual variance.
VarianceHyper tune_empirical_bayes(const ArealPanel& panel, const CovariateMatrix& covariates,
                                   std::span<const int> train_columns, double cv = 0.1);

// Flat gamma, p(sigma^2) ~ 1/sigma^2 and p(tau^2) ~ 1/tau for alpha and beta.
PriorSpec noninformative_prior(const ModelConfig& config);
PriorSpec make_prior_spec(const ModelConfig& config, const VarianceHyper& tuned);

// CAR precision Sigma^{-1} for alpha (or beta) under the family and state.
// GlobalShrinkage and the non-spatial families give the identity.
SparseMatrix coefficient_precision(ModelFamily family, const AdjacencyGraph& graph,
                                   const ThetaState& state, bool for_alpha);

struct JointPrior {
  Eigen::VectorXd theta0;  // (0, alpha0 1, beta0 1)
  SparseMatrix omega0;     // blockdiag(tau_g^-2 I, tau_a^-2 Sigma_a^-1, tau_b^-2 Sigma_b^-1)
};

JointPrior build_joint_prior(ModelFamily family, const AdjacencyGraph& graph,
                             const ThetaState& state, int d, bool flat_gamma = false);

}  // namespace areltrend
