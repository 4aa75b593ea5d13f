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

#include "areltrend/model.hpp"

#include <array>
#include <cmath>

#include "areltrend/error.hpp"
#include "areltrend/evaluate.hpp"

namespace areltrend {

namespace {

struct FamilyNames {
  ModelFamily family;
  std::string_view canonical;
  std::string_view cli;
};

constexpr std::array<FamilyNames, 6> kFamilyNames = {{
    {ModelFamily::GlobalTrend, "GlobalTrend", "global-trend"},
    {ModelFamily::NoShrinkage, "NoShrinkage", "no-shrinkage"},
    {ModelFamily::GlobalShrinkage, "GlobalShrinkage", "global"},
    {ModelFamily::SpatialCAR, "SpatialCAR", "car"},
    {ModelFamily::VariableBorders, "VariableBorders", "variable-borders"},
    {ModelFamily::VariableBordersAlphaOnly, "VariableBordersAlphaOnly", "variable-borders-alpha"},
}};

}  // namespace

std::string_view to_string(ModelFamily family) {
  for (const auto& f : kFamilyNames) {
    if (f.family == family) return f.canonical;
  }
  return "unknown";
}

std::string_view cli_name(ModelFamily family) {
  for (const auto& f : kFamilyNames) {
    if (f.family == family) return f.cli;
  }
  return "unknown";
}

ModelFamily parse_model_family(std::string_view text) {
  for (const auto& f : kFamilyNames) {
    if (text == f.cli || text == f.canonical) return f.family;
  }
  throw InputError("unknown model family '" + std::string(text) + "'");
}

bool is_bayesian(ModelFamily family) {
  return family != ModelFamily::GlobalTrend && family != ModelFamily::NoShrinkage;
}

bool has_spatial_prior(ModelFamily family) {
  return family == ModelFamily::SpatialCAR || family == ModelFamily::VariableBorders ||
         family == ModelFamily::VariableBordersAlphaOnly;
}

bool has_variable_alpha(ModelFamily family) {
  return family == ModelFamily::VariableBorders || family == ModelFamily::VariableBordersAlphaOnly;
}

bool has_variable_beta(ModelFamily family) { return family == ModelFamily::VariableBorders; }

void ModelConfig::validate() const {
  if (chain.n_iter <= 0) throw InputError("n_iter must be positive");
  if (chain.burn_in < 0 || chain.burn_in >= chain.n_iter) {
    throw InputError("burn_in must satisfy 0 <= burn_in < n_iter");
  }
  if (chain.thin < 1) throw InputError("thin must be at least 1");
  if (chain.n_chains < 1) throw InputError("n_chains must be at least 1");
  if (!(prior_cv > 0.0)) throw InputError("prior_cv must be positive");
  if (!(mh_b > 0.0)) throw InputError("mh_b must be positive");
  if (!(rho_prior.a > 0.0 && rho_prior.b > 0.0)) throw InputError("rho prior must be a proper Beta");
  if (ig_hyper) {
    for (const auto& ig : {ig_hyper->sigma, ig_hyper->alpha, ig_hyper->beta, ig_hyper->gamma}) {
      if (!(ig.shape > 0.0 && ig.rate > 0.0)) {
        throw InputError("Inverse-Gamma hyperparameters must be positive");
      }
    }
  }
}

Eigen::VectorXd ThetaState::theta() const {
  Eigen::VectorXd t(gamma.size() + alpha.size() + beta.size());
  t << gamma, alpha, beta;
  return t;
}

void ThetaState::set_theta(const Eigen::VectorXd& theta) {
  const auto d = gamma.size();
  const auto n = alpha.size();
  if (theta.size() != d + 2 * n) throw DimensionError("theta length mismatch");
  gamma = theta.head(d);
  alpha = theta.segment(d, n);
  beta = theta.tail(n);
}

InverseGamma inverse_gamma_from_mean(double mean, double cv) {
  if (!(mean > 0.0)) throw NumericalError("empirical-Bayes variance estimate is not positive");
  const double shape = 2.0 + 1.0 / (cv * cv);
  return {shape, mean * (shape - 1.0)};
}

VarianceHyper tune_empirical_bayes(const NoShrinkageVariances& estimates, double cv) {
  VarianceHyper hyper;
  hyper.sigma = inverse_gamma_from_mean(estimates.sigma2, cv);
  hyper.alpha = inverse_gamma_from_mean(estimates.tau2_alpha, cv);
  hyper.beta = inverse_gamma_from_mean(estimates.tau2_beta, cv);
  // With no covariates there is nothing to estimate; any proper prior works.
  hyper.gamma = inverse_gamma_from_mean(estimates.tau2_gamma > 0.0 ? estimates.tau2_gamma : 1.0, cv);
  return hyper;
}

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

VarianceHyper tune_empirical_bayes(const ArealPanel& panel, const CovariateMatrix& covariates,
                                   std::span<const int> train_columns, double cv) {
  const auto fit = fit_no_shrinkage(panel, covariates, train_columns);
  if (fit.residual_dof <= 0 || !(fit.rss > 0.0)) {
    throw NumericalError("no-shrinkage fit leaves no residual variance; cannot tune priors");
  }
  NoShrinkageVariances est;
  est.sigma2 = fit.rss / fit.residual_dof;
  est.tau2_alpha = sample_variance(fit.fit.alpha);
  est.tau2_beta = sample_variance(fit.fit.beta);
  est.tau2_gamma = fit.stage1_gamma.size() > 0 ? fit.stage1_gamma.squaredNorm() /
                                                     static_cast<double>(fit.stage1_gamma.size())
                                               : 0.0;
  return tune_empirical_bayes(est, cv);
}

PriorSpec noninformative_prior(const ModelConfig& config) {
  PriorSpec spec;
  // p(s2) ~ s2^-1 is IG(0, 0); p(t2) ~ t^-1 = (t2)^(-1/2) is IG(-1/2, 0).
  spec.variance.sigma = {0.0, 0.0};
  spec.variance.alpha = {-0.5, 0.0};
  spec.variance.beta = {-0.5, 0.0};
  spec.variance.gamma = {0.0, 0.0};
  spec.flat_gamma = true;
  spec.rho = config.rho_prior;
  spec.phi = config.phi_beta_prior();
  return spec;
}

PriorSpec make_prior_spec(const ModelConfig& config, const VarianceHyper& tuned) {
  if (config.prior_mode == PriorMode::Noninformative) return noninformative_prior(config);
  PriorSpec spec;
  spec.variance = config.ig_hyper.value_or(tuned);
  spec.flat_gamma = false;
  spec.rho = config.rho_prior;
  spec.phi = config.phi_beta_prior();
  return spec;
}

SparseMatrix coefficient_precision(ModelFamily family, const AdjacencyGraph& graph,
                                   const ThetaState& state, bool for_alpha) {
  if (!has_spatial_prior(family)) {
    SparseMatrix eye(graph.size(), graph.size());
    eye.setIdentity();
    return eye;
  }
  const bool variable = for_alpha ? has_variable_alpha(family) : has_variable_beta(family);
  if (!variable) return car_precision(graph, {}, state.rho);
  const auto& mask = for_alpha ? state.w_alpha : state.w_beta;
  if (static_cast<int>(mask.size()) != graph.edge_count()) {
    throw DimensionError("border vector length does not match the edge count");
  }
  return car_precision(graph, mask, state.rho);
}

JointPrior build_joint_prior(ModelFamily family, const AdjacencyGraph& graph,
                             const ThetaState& state, int d, bool flat_gamma) {
  const int n = graph.size();
  if (state.alpha.size() != n || state.beta.size() != n) {
    throw DimensionError("state does not match the graph size");
  }
  for (const double v : {state.tau2_alpha, state.tau2_beta}) {
    if (!(v > 0.0)) throw NumericalError("prior variance must be positive");
  }
  if (!flat_gamma && d > 0 && !(state.tau2_gamma > 0.0)) {
    throw NumericalError("prior variance must be positive");
  }
  JointPrior prior;
  prior.theta0 = Eigen::VectorXd::Zero(d + 2 * n);
  prior.theta0.segment(d, n).setConstant(state.alpha0);
  prior.theta0.segment(d + n, n).setConstant(state.beta0);

  const SparseMatrix prec_alpha = coefficient_precision(family, graph, state, true);
  const SparseMatrix prec_beta = coefficient_precision(family, graph, state, false);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(d + prec_alpha.nonZeros() + prec_beta.nonZeros()));
  const double gamma_precision = flat_gamma ? 0.0 : 1.0 / state.tau2_gamma;
  for (int j = 0; j < d; ++j) triplets.emplace_back(j, j, gamma_precision);
  const double ia = 1.0 / state.tau2_alpha;
  const double ib = 1.0 / state.tau2_beta;
  for (int k = 0; k < prec_alpha.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(prec_alpha, k); it; ++it) {
      triplets.emplace_back(d + it.row(), d + it.col(), ia * it.value());
    }
  }
  for (int k = 0; k < prec_beta.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(prec_beta, k); it; ++it) {
      triplets.emplace_back(d + n + it.row(), d + n + it.col(), ib * it.value());
    }
  }
  prior.omega0.resize(d + 2 * n, d + 2 * n);
  prior.omega0.setFromTriplets(triplets.begin(), triplets.end());
  return prior;
}

}  // namespace areltrend
